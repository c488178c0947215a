//! Transit-only baseline, integrated-vs-baseline comparison and the budget
//! sensitivity grid.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assignment::{mode_shares, solve_assignment, AssignmentSolution, Backend, ModeShares, ObjectiveSplit};
use crate::benders::{run_enhanced, BendersConfig, BendersContext, BendersError, BendersRun, BendersStatus};
use crate::design::{buses_required, DesignConfig, DesignDecision, SENTINEL_FLEET};
use crate::network::{DemandEntry, MultimodalNetwork};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Benders(#[from] BendersError),
    #[error("bus budget {budget} cannot run every line: {needed} buses needed at the lowest frequency")]
    BudgetTooSmall { budget: f64, needed: u64 },
    #[error("no origin/destination pair is reachable without the road layer")]
    NothingServed,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// One row of the per-route frequency table.
#[derive(Debug, Clone, Serialize)]
pub struct RouteFrequency {
    pub route: String,
    /// Buses per hour, `None` when the route is closed.
    pub frequency: Option<f64>,
    pub buses: u64,
    /// `60/f` minutes.
    pub mean_wait: Option<f64>,
}

pub fn route_table(net: &MultimodalNetwork, cfg: &DesignConfig, d: &DesignDecision) -> Vec<RouteFrequency> {
    net.lines
        .iter()
        .zip(&d.line_freq)
        .map(|(line, f)| {
            let freq = f.map(|i| cfg.frequencies[i]);
            RouteFrequency {
                route: line.id.clone(),
                frequency: freq,
                buses: freq.map_or(0, |f| buses_required(line.one_way_time, f)),
                mean_wait: freq.map(|f| 60.0 / f),
            }
        })
        .collect()
}

/// One column of the comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub active_routes: usize,
    pub buses_used: u64,
    pub vehicles_used: f64,
    pub total_trips: f64,
    pub served_trips: f64,
    pub satisfied_pct: f64,
    /// Minutes per served passenger.
    pub avg_in_vehicle: f64,
    pub avg_wait: f64,
    pub avg_walk: f64,
    pub split: ObjectiveSplit,
    pub objective: f64,
    pub shares: ModeShares,
}

impl ScenarioSummary {
    fn build(
        scenario: &str,
        net: &MultimodalNetwork,
        cfg: &DesignConfig,
        design: &DesignDecision,
        sol: &AssignmentSolution,
        total_trips: f64,
        count_vehicles: bool,
    ) -> Self {
        let served = net.total_demand();
        let per = |x: f64| if served > 0.0 { x / served } else { 0.0 };
        let s = sol.split;
        ScenarioSummary {
            scenario: scenario.into(),
            active_routes: design.open_lines(),
            buses_used: design.buses(net, cfg),
            vehicles_used: if count_vehicles {
                design
                    .zone_fleet
                    .iter()
                    .map(|&n| cfg.fleet_sizes[n])
                    .filter(|&v| v > SENTINEL_FLEET)
                    .sum()
            } else {
                0.0
            },
            total_trips,
            served_trips: served,
            satisfied_pct: if total_trips > 0.0 { 100.0 * served / total_trips } else { 100.0 },
            avg_in_vehicle: per(s.in_vehicle),
            avg_wait: per(s.transit_wait + s.road_wait),
            avg_walk: per(s.walk),
            split: s,
            objective: sol.objective,
            shares: mode_shares(net, sol),
        }
    }

    /// Largest mismatch between the per-passenger averages and the totals.
    pub fn reconciliation_error(&self) -> f64 {
        let n = self.served_trips;
        let s = &self.split;
        let e1 = (self.avg_in_vehicle * n - s.in_vehicle).abs();
        let e2 = (self.avg_wait * n - (s.transit_wait + s.road_wait)).abs();
        let e3 = (self.avg_walk * n - s.walk).abs();
        let e4 = ((self.avg_in_vehicle + self.avg_wait + self.avg_walk) * n - self.objective).abs();
        let e5 = (s.total() - self.objective).abs();
        [e1, e2, e3, e4, e5].into_iter().fold(0.0, f64::max) / (1.0 + self.objective.abs())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineResult {
    pub design: DesignDecision,
    pub routes: Vec<RouteFrequency>,
    pub summary: ScenarioSummary,
    /// Demand that cannot reach its destination by walking and transit.
    pub unsatisfied: Vec<DemandEntry>,
    pub run: BendersRun,
}

/// Splits demand into pairs reachable on `net` over lines that cannot be
/// closed, and the rest.
fn reachable_demand(net: &MultimodalNetwork, cfg: &DesignConfig) -> (Vec<DemandEntry>, Vec<DemandEntry>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for k in net.destinations() {
        let reach = net.reverse_reachable(k, |a| a.line.is_none_or(|l| cfg.line_forced_open(net, l)));
        for e in net.demand.iter().filter(|e| e.destination == k) {
            if reach[e.origin] {
                ok.push(e.clone());
            } else {
                bad.push(e.clone());
            }
        }
    }
    (ok, bad)
}

/// Optimizes frequencies with the road layer removed. With `force_open`
/// every line runs at some frequency. Otherwise candidate lines may close,
/// and demand that needs one of them to reach its destination is reported
/// as unsatisfied.
pub fn solve_baseline(
    net: &MultimodalNetwork,
    cfg: &DesignConfig,
    bc: &BendersConfig,
    force_open: bool,
) -> Result<BaselineResult, BaselineError> {
    let transit = net.transit_only();
    let mut bcfg = cfg.clone();
    bcfg.force_all_lines_open = force_open;
    let (ok, unsatisfied) = reachable_demand(&transit, &bcfg);
    if ok.is_empty() {
        return Err(BaselineError::NothingServed);
    }
    let served = transit.with_demand_filter(|e| {
        ok.iter()
            .any(|o| o.origin == e.origin && o.destination == e.destination)
    });
    bcfg.fleet_sizes = vec![SENTINEL_FLEET];
    bcfg.fleet_budget = SENTINEL_FLEET * net.zones.len() as f64 + 1.0;
    let minimal = DesignDecision::minimal(&served, &bcfg);
    if !minimal.is_feasible(&served, &bcfg) {
        return Err(BaselineError::BudgetTooSmall {
            budget: cfg.bus_budget,
            needed: minimal.buses(&served, &bcfg),
        });
    }
    let ctx = BendersContext::build(&served, &bcfg, false)?;
    let run = run_enhanced(&ctx, bc)?;
    let sol = solve_assignment(&ctx.problem(&run.best_design), Backend::Hyperpath)
        .map_err(BendersError::from)?;
    let summary = ScenarioSummary::build(
        "baseline",
        &served,
        &bcfg,
        &run.best_design,
        &sol,
        net.total_demand(),
        false,
    );
    Ok(BaselineResult {
        routes: route_table(&served, &bcfg, &run.best_design),
        design: run.best_design.clone(),
        summary,
        unsatisfied,
        run,
    })
}

/// Summary of the integrated design `d` on the full network.
pub fn summarize_integrated(
    net: &MultimodalNetwork,
    cfg: &DesignConfig,
    d: &DesignDecision,
) -> Result<ScenarioSummary, BendersError> {
    let ctx = BendersContext::new(net, cfg)?;
    let sol = solve_assignment(&ctx.problem(d), Backend::Hyperpath)?;
    Ok(ScenarioSummary::build("integrated", net, cfg, d, &sol, net.total_demand(), true))
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub integrated: ScenarioSummary,
    pub baseline: ScenarioSummary,
    pub integrated_routes: Vec<RouteFrequency>,
    pub baseline_routes: Vec<RouteFrequency>,
}

impl ComparisonReport {
    pub fn write_json(&self, path: &Path) -> Result<(), BaselineError> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self).map_err(std::io::Error::other)?;
        Ok(())
    }
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = (&self.integrated, &self.baseline);
        writeln!(f, "{:<34}{:>14}{:>14}", "", "integrated", "baseline")?;
        writeln!(f, "{:<34}{:>14}{:>14}", "active routes", a.active_routes, b.active_routes)?;
        writeln!(f, "{:<34}{:>14}{:>14}", "buses used", a.buses_used, b.buses_used)?;
        writeln!(f, "{:<34}{:>14.0}{:>14.0}", "MoD vehicles used", a.vehicles_used, b.vehicles_used)?;
        writeln!(f, "{:<34}{:>13.2}%{:>13.2}%", "satisfied demand", a.satisfied_pct, b.satisfied_pct)?;
        writeln!(
            f,
            "{:<34}{:>14.2}{:>14.2}",
            "avg in-vehicle time (min/pax)", a.avg_in_vehicle, b.avg_in_vehicle
        )?;
        writeln!(f, "{:<34}{:>14.2}{:>14.2}", "avg wait time (min/pax)", a.avg_wait, b.avg_wait)?;
        writeln!(f, "{:<34}{:>14.2}{:>14.2}", "avg walk time (min/pax)", a.avg_walk, b.avg_walk)?;
        writeln!(f)?;
        writeln!(f, "{:<10}{:>14}{:>14}{:>8}{:>22}", "route", "integrated", "baseline", "buses", "mean wait (min, 60/f)")?;
        for (r, s) in self.integrated_routes.iter().zip(&self.baseline_routes) {
            let fmt = |x: Option<f64>| x.map_or("closed".to_string(), |v| format!("{v}/hr"));
            writeln!(
                f,
                "{:<10}{:>14}{:>14}{:>8}{:>22}",
                r.route,
                fmt(r.frequency),
                fmt(s.frequency),
                s.buses,
                s.mean_wait.map_or("-".into(), |w| format!("{w:.2}"))
            )?;
        }
        Ok(())
    }
}

pub fn compare(
    net: &MultimodalNetwork,
    cfg: &DesignConfig,
    integrated: &DesignDecision,
    baseline: &BaselineResult,
) -> Result<ComparisonReport, BendersError> {
    Ok(ComparisonReport {
        integrated: summarize_integrated(net, cfg, integrated)?,
        baseline: baseline.summary.clone(),
        integrated_routes: route_table(net, cfg, integrated),
        baseline_routes: baseline.routes.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub buses: f64,
    pub vehicles: f64,
    pub status: Option<BendersStatus>,
    pub ivt_hr: f64,
    pub road_wait_hr: f64,
    pub transit_wait_hr: f64,
    pub total_hr: f64,
    pub share_mod: f64,
    pub share_transit: f64,
    pub share_multi: f64,
    pub routes_located: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityGrid {
    pub bus_budgets: Vec<f64>,
    pub fleet_budgets: Vec<f64>,
    /// Row-major: bus budget outer, fleet budget inner.
    pub cells: Vec<GridCell>,
}

impl SensitivityGrid {
    pub fn cell(&self, b: usize, v: usize) -> &GridCell {
        &self.cells[b * self.fleet_budgets.len() + v]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "buses",
            "vehicles",
            "ivt_hr",
            "road_wait_hr",
            "transit_wait_hr",
            "total_hr",
            "share_mod",
            "share_transit",
            "share_multi",
            "routes_located",
        ])?;
        for c in &self.cells {
            wr.write_record([
                c.buses.to_string(),
                c.vehicles.to_string(),
                format!("{:.6}", c.ivt_hr),
                format!("{:.6}", c.road_wait_hr),
                format!("{:.6}", c.transit_wait_hr),
                format!("{:.6}", c.total_hr),
                format!("{:.4}", c.share_mod),
                format!("{:.4}", c.share_transit),
                format!("{:.4}", c.share_multi),
                c.routes_located.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// One design run per (bus budget, fleet budget) pair. Failed cells are
/// recorded and the grid carries on.
pub fn run_sensitivity(
    net: &MultimodalNetwork,
    cfg: &DesignConfig,
    bc: &BendersConfig,
    bus_budgets: &[f64],
    fleet_budgets: &[f64],
) -> SensitivityGrid {
    let pairs: Vec<(f64, f64)> = bus_budgets
        .iter()
        .flat_map(|&b| fleet_budgets.iter().map(move |&v| (b, v)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(b, v)| {
            let mut c = cfg.clone();
            c.bus_budget = b;
            c.fleet_budget = v;
            solve_cell(net, &c, bc).unwrap_or_else(|e| GridCell {
                buses: b,
                vehicles: v,
                status: None,
                ivt_hr: f64::NAN,
                road_wait_hr: f64::NAN,
                transit_wait_hr: f64::NAN,
                total_hr: f64::NAN,
                share_mod: f64::NAN,
                share_transit: f64::NAN,
                share_multi: f64::NAN,
                routes_located: 0,
                error: Some(e.to_string()),
            })
        })
        .collect();
    SensitivityGrid {
        bus_budgets: bus_budgets.to_vec(),
        fleet_budgets: fleet_budgets.to_vec(),
        cells,
    }
}

fn solve_cell(net: &MultimodalNetwork, cfg: &DesignConfig, bc: &BendersConfig) -> Result<GridCell, BendersError> {
    let ctx = BendersContext::new(net, cfg)?;
    let run = run_enhanced(&ctx, bc)?;
    let sol = solve_assignment(&ctx.problem(&run.best_design), Backend::Hyperpath)?;
    let shares = mode_shares(net, &sol);
    let s = sol.split;
    Ok(GridCell {
        buses: cfg.bus_budget,
        vehicles: cfg.fleet_budget,
        status: Some(run.status),
        ivt_hr: s.in_vehicle / 60.0,
        road_wait_hr: s.road_wait / 60.0,
        transit_wait_hr: s.transit_wait / 60.0,
        total_hr: sol.objective / 60.0,
        share_mod: shares.road,
        share_transit: shares.transit,
        share_multi: shares.multimodal,
        routes_located: run.best_design.open_lines(),
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{row_line, toy_instances, grid_instance, GridSpec};

    fn one_line(budget: f64) -> GridSpec {
        GridSpec {
            name: "one-line".into(),
            rows: 2,
            cols: 4,
            spacing: 1.0,
            zone_rows: 1,
            zone_cols: 2,
            lines: vec![row_line("L1", 0, 4, 1)],
            road_mph: 20.0,
            bus_mph: 15.0,
            trips: (20.0, 40.0),
            seed: 5,
            config: DesignConfig {
                frequencies: vec![3.0, 6.0, 12.0],
                fleet_sizes: vec![0.01, 50.0],
                bus_budget: budget,
                fleet_budget: 100.0,
                ..DesignConfig::default()
            },
        }
    }

    #[test]
    fn frequency_rises_until_budget_binds() {
        let probe = grid_instance(&one_line(1000.0));
        let t = probe.net.lines[0].one_way_time;
        let need: Vec<u64> = [3.0, 6.0, 12.0].iter().map(|&f| buses_required(t, f)).collect();
        assert!(need[0] < need[1] && need[1] < need[2]);
        for (budget, want) in [(1000.0, 12.0), (need[1] as f64, 6.0), (need[0] as f64, 3.0)] {
            let inst = grid_instance(&one_line(budget));
            let res = solve_baseline(&inst.net, &inst.config, &BendersConfig::enhanced(), true).unwrap();
            assert_eq!(res.run.status, BendersStatus::Optimal);
            assert_eq!(res.routes[0].frequency, Some(want), "budget {budget}");
            assert!(res.summary.buses_used as f64 <= budget);
            assert_eq!(res.summary.vehicles_used, 0.0);
        }
    }

    #[test]
    fn forced_lines_need_enough_buses() {
        let inst = grid_instance(&one_line(0.0));
        match solve_baseline(&inst.net, &inst.config, &BendersConfig::enhanced(), true) {
            Err(BaselineError::BudgetTooSmall { needed, .. }) => assert!(needed > 0),
            other => panic!("expected BudgetTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn closable_lines_serve_walking_demand_only() {
        let inst = &toy_instances()[1];
        let open = solve_baseline(&inst.net, &inst.config, &BendersConfig::enhanced(), true).unwrap();
        match solve_baseline(&inst.net, &inst.config, &BendersConfig::enhanced(), false) {
            Ok(relaxed) => {
                assert!(relaxed.summary.served_trips <= open.summary.served_trips + 1e-9);
                assert!(relaxed.unsatisfied.len() >= open.unsatisfied.len());
            }
            Err(BaselineError::NothingServed) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn averages_reconcile_with_split() {
        let inst = &toy_instances()[1];
        let base = solve_baseline(&inst.net, &inst.config, &BendersConfig::enhanced(), true).unwrap();
        assert!(base.summary.reconciliation_error() < 1e-6);
        let unserved: f64 = base.unsatisfied.iter().map(|e| e.trips).sum();
        let s = &base.summary;
        assert!((s.served_trips + unserved - s.total_trips).abs() < 1e-6 * s.total_trips);
        assert!(s.satisfied_pct <= 100.0 + 1e-9);

        let integrated = summarize_integrated(&inst.net, &inst.config, &base.design).unwrap();
        assert!(integrated.reconciliation_error() < 1e-6);
        assert!((integrated.satisfied_pct - 100.0).abs() < 1e-9);
        let report = ComparisonReport {
            integrated,
            baseline: base.summary.clone(),
            integrated_routes: route_table(&inst.net, &inst.config, &base.design),
            baseline_routes: base.routes.clone(),
        };
        let text = report.to_string();
        assert!(text.contains("satisfied demand"));
        assert!(text.contains("mean wait"));
    }

    #[test]
    fn grid_csv_has_one_row_per_cell() {
        let inst = &toy_instances()[1];
        let g = run_sensitivity(&inst.net, &inst.config, &BendersConfig::enhanced(), &[20.0], &[100.0, 200.0]);
        let mut out = Vec::new();
        g.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("buses,vehicles,ivt_hr"));
        assert!(g.cell(0, 1).total_hr <= g.cell(0, 0).total_hr + 1e-6);
    }
}
