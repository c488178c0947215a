//! Design-side data and the design MILP.
//!
//! A design opens a subset of lines, gives every open line one frequency
//! from the menu and every zone one MoD fleet size. The bilinear
//! rate-times-wait rows of the design model are linearized with McCormick
//! envelopes over `0 <= W_ik <= Wbar_ik`, which is exact at binary points.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{
    append_assignment_lp, option_kind, AssignmentProblem, OptionKind, ServiceRates, WaitBounds,
};
use crate::kernel::{Sense, SolverModel};
use crate::network::{FarePolicy, MultimodalNetwork};

pub const SENTINEL_FLEET: f64 = 0.01;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    /// Frequency menu, buses per hour.
    pub frequencies: Vec<f64>,
    /// Fleet-size menu, vehicles per zone.
    pub fleet_sizes: Vec<f64>,
    pub bus_budget: f64,
    pub fleet_budget: f64,
    /// Currency per hour.
    pub value_of_time: f64,
    pub transit_fare: f64,
    pub mod_base_fare: f64,
    pub mod_fare_per_min: f64,
    /// MoD matching coefficient, 1/(vehicle minute).
    pub matching_coef: f64,
    /// Per-zone overrides of the matching coefficient, by zone id.
    pub zone_matching: BTreeMap<String, f64>,
    /// Walking reach, miles.
    pub walk_distance: f64,
    pub walk_speed_mph: f64,
    /// Multiplier on the estimated wait bounds.
    pub wait_bound_safety: f64,
    /// Keep every line open (transit-only baseline).
    pub force_all_lines_open: bool,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            frequencies: vec![2.0, 3.0, 4.0, 6.0, 12.0],
            fleet_sizes: vec![SENTINEL_FLEET, 50.0, 100.0, 200.0, 500.0],
            bus_budget: 70.0,
            fleet_budget: 3000.0,
            value_of_time: 23.0,
            transit_fare: 2.0,
            mod_base_fare: 0.8,
            mod_fare_per_min: 0.21,
            matching_coef: 0.0017,
            zone_matching: BTreeMap::new(),
            walk_distance: 0.5,
            walk_speed_mph: 3.0,
            wait_bound_safety: 1.1,
            force_all_lines_open: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{file}, row {row}: {msg}")]
    Row { file: String, row: usize, msg: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("missing wait bound for node {node}, destination {destination}")]
    MissingBound { node: String, destination: String },
}

impl DesignConfig {
    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: &str| Err(DesignError::Config(m.to_string()));
        if self.frequencies.is_empty() || self.frequencies.iter().any(|f| !(*f > 0.0)) {
            return bad("frequencies must be a nonempty list of positive values");
        }
        if self.fleet_sizes.is_empty() || self.fleet_sizes.iter().any(|n| !(*n > 0.0)) {
            return bad("fleet sizes must be a nonempty list of positive values");
        }
        if !(self.bus_budget >= 0.0) || !(self.fleet_budget >= 0.0) {
            return bad("budgets must be nonnegative");
        }
        if !(self.value_of_time > 0.0) {
            return bad("value of time must be positive");
        }
        if !(self.matching_coef > 0.0) || self.zone_matching.values().any(|a| !(*a > 0.0)) {
            return bad("matching coefficients must be positive");
        }
        if !(self.walk_distance > 0.0) || !(self.walk_speed_mph > 0.0) {
            return bad("walking distance and speed must be positive");
        }
        if !(self.wait_bound_safety >= 1.0) {
            return bad("wait bound safety factor must be at least 1");
        }
        if [self.transit_fare, self.mod_base_fare, self.mod_fare_per_min]
            .iter()
            .any(|x| !(*x >= 0.0))
        {
            return bad("fares must be nonnegative");
        }
        if !self.fleet_sizes.iter().any(|&n| (n - SENTINEL_FLEET).abs() < 1e-12) {
            log::warn!("fleet menu has no 0.01 sentinel; subproblem feasibility is not guaranteed");
        }
        Ok(())
    }

    pub fn fares(&self) -> FarePolicy {
        FarePolicy {
            transit_fare: self.transit_fare,
            mod_base_fare: self.mod_base_fare,
            mod_fare_per_min: self.mod_fare_per_min,
        }
    }

    pub fn zone_matching_coef(&self, net: &MultimodalNetwork, z: usize) -> f64 {
        self.zone_matching
            .get(&net.zones[z].id)
            .copied()
            .unwrap_or(self.matching_coef)
    }

    /// Lines that must stay open.
    pub fn line_forced_open(&self, net: &MultimodalNetwork, l: usize) -> bool {
        self.force_all_lines_open || !net.lines[l].candidate
    }

    pub fn min_fleet_index(&self) -> usize {
        argmin(&self.fleet_sizes)
    }

    pub fn min_frequency_index(&self) -> usize {
        argmin(&self.frequencies)
    }
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len())
        .min_by(|&a, &b| v[a].total_cmp(&v[b]))
        .unwrap_or(0)
}

/// Buses needed to run a line with the given one-way time at `f` buses per
/// hour, rounded up.
pub fn buses_required(one_way_minutes: f64, buses_per_hour: f64) -> u64 {
    let exact = buses_per_hour * 2.0 * one_way_minutes / 60.0;
    (exact - 1e-9).ceil().max(0.0) as u64
}

/// `B(l, f)` for every line and frequency index.
pub fn bus_table(net: &MultimodalNetwork, cfg: &DesignConfig) -> Vec<Vec<u64>> {
    net.lines
        .iter()
        .map(|line| {
            cfg.frequencies
                .iter()
                .map(|&f| buses_required(line.one_way_time, f))
                .collect()
        })
        .collect()
}

/// One design: frequency index per line (`None` = closed) and fleet index per zone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DesignDecision {
    pub line_freq: Vec<Option<usize>>,
    pub zone_fleet: Vec<usize>,
}

impl DesignDecision {
    /// All lines closed (unless forced open, then at the lowest frequency),
    /// smallest fleet everywhere.
    pub fn minimal(net: &MultimodalNetwork, cfg: &DesignConfig) -> DesignDecision {
        let f0 = cfg.min_frequency_index();
        DesignDecision {
            line_freq: (0..net.lines.len())
                .map(|l| cfg.line_forced_open(net, l).then_some(f0))
                .collect(),
            zone_fleet: vec![cfg.min_fleet_index(); net.zones.len()],
        }
    }

    pub fn rates(&self, net: &MultimodalNetwork, cfg: &DesignConfig) -> ServiceRates {
        ServiceRates {
            line: self
                .line_freq
                .iter()
                .map(|f| f.map_or(0.0, |i| cfg.frequencies[i] / 60.0))
                .collect(),
            zone: self
                .zone_fleet
                .iter()
                .enumerate()
                .map(|(z, &n)| cfg.zone_matching_coef(net, z) * cfg.fleet_sizes[n])
                .collect(),
        }
    }

    pub fn buses(&self, net: &MultimodalNetwork, cfg: &DesignConfig) -> u64 {
        self.line_freq
            .iter()
            .enumerate()
            .filter_map(|(l, f)| f.map(|i| buses_required(net.lines[l].one_way_time, cfg.frequencies[i])))
            .sum()
    }

    pub fn vehicles(&self, cfg: &DesignConfig) -> f64 {
        self.zone_fleet.iter().map(|&n| cfg.fleet_sizes[n]).sum()
    }

    pub fn open_lines(&self) -> usize {
        self.line_freq.iter().filter(|f| f.is_some()).count()
    }

    pub fn is_feasible(&self, net: &MultimodalNetwork, cfg: &DesignConfig) -> bool {
        self.line_freq.len() == net.lines.len()
            && self.zone_fleet.len() == net.zones.len()
            && self.line_freq.iter().all(|f| f.map_or(true, |i| i < cfg.frequencies.len()))
            && self.zone_fleet.iter().all(|&n| n < cfg.fleet_sizes.len())
            && (0..net.lines.len()).all(|l| !cfg.line_forced_open(net, l) || self.line_freq[l].is_some())
            && self.buses(net, cfg) as f64 <= cfg.bus_budget + 1e-9
            && self.vehicles(cfg) <= cfg.fleet_budget + 1e-9
    }

    pub fn describe(&self, net: &MultimodalNetwork, cfg: &DesignConfig) -> String {
        let lines: Vec<String> = self
            .line_freq
            .iter()
            .enumerate()
            .filter_map(|(l, f)| f.map(|i| format!("{}@{}", net.lines[l].id, cfg.frequencies[i])))
            .collect();
        let zones: Vec<String> = self
            .zone_fleet
            .iter()
            .enumerate()
            .map(|(z, &n)| format!("{}:{}", net.zones[z].id, cfg.fleet_sizes[n]))
            .collect();
        format!("lines[{}] fleet[{}]", lines.join(" "), zones.join(" "))
    }

    /// Writes `kind,id,value` rows: line frequency (0 = closed) and zone fleet.
    pub fn write_csv(&self, net: &MultimodalNetwork, cfg: &DesignConfig, path: &Path) -> Result<(), DesignError> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        w.write_record(["kind", "id", "value"]).map_err(csv_io)?;
        for (l, f) in self.line_freq.iter().enumerate() {
            let v = f.map_or(0.0, |i| cfg.frequencies[i]);
            w.write_record(["line", &net.lines[l].id, &v.to_string()]).map_err(csv_io)?;
        }
        for (z, &n) in self.zone_fleet.iter().enumerate() {
            w.write_record(["zone", &net.zones[z].id, &cfg.fleet_sizes[n].to_string()])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a design file. Values must be on the configured menus; lines
    /// and zones not listed default to closed and to the smallest fleet.
    pub fn read_csv(net: &MultimodalNetwork, cfg: &DesignConfig, path: &Path) -> Result<DesignDecision, DesignError> {
        #[derive(Deserialize)]
        struct Row {
            kind: String,
            id: String,
            value: f64,
        }
        let file = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut d = DesignDecision {
            line_freq: vec![None; net.lines.len()],
            zone_fleet: vec![cfg.min_fleet_index(); net.zones.len()],
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_io)?;
        let err = |row: usize, msg: String| DesignError::Row {
            file: file.clone(),
            row,
            msg,
        };
        let find = |menu: &[f64], v: f64| menu.iter().position(|&m| (m - v).abs() <= 1e-9 * m.abs().max(1.0));
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = i + 2;
            let r = rec.map_err(|e| err(row, e.to_string()))?;
            match r.kind.as_str() {
                "line" => {
                    let l = net
                        .line_by_id(&r.id)
                        .ok_or_else(|| err(row, format!("unknown line '{}'", r.id)))?;
                    d.line_freq[l] = if r.value == 0.0 {
                        None
                    } else {
                        Some(find(&cfg.frequencies, r.value).ok_or_else(|| {
                            err(row, format!("frequency {} is not on the menu", r.value))
                        })?)
                    };
                }
                "zone" => {
                    let z = net
                        .zone_by_id(&r.id)
                        .ok_or_else(|| err(row, format!("unknown zone '{}'", r.id)))?;
                    d.zone_fleet[z] = find(&cfg.fleet_sizes, r.value)
                        .ok_or_else(|| err(row, format!("fleet {} is not on the menu", r.value)))?;
                }
                other => return Err(err(row, format!("unknown kind '{}'", other))),
            }
        }
        Ok(d)
    }
}

fn csv_io(e: csv::Error) -> DesignError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DesignError::Io(io),
        other => DesignError::Config(format!("{:?}", other)),
    }
}

impl fmt::Display for DesignDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self
            .line_freq
            .iter()
            .map(|x| x.map_or("-".to_string(), |i| i.to_string()))
            .collect();
        let zones: Vec<String> = self.zone_fleet.iter().map(|n| n.to_string()).collect();
        write!(f, "y[{}] N[{}]", lines.join(","), zones.join(","))
    }
}

/// Column indices of the design binaries inside a model.
#[derive(Debug, Clone)]
pub struct DesignVars {
    pub x: Vec<usize>,
    /// `y[l][f]`.
    pub y: Vec<Vec<usize>>,
    /// `n[z][n]`.
    pub n: Vec<Vec<usize>>,
}

impl DesignVars {
    pub fn encode(&self, d: &DesignDecision, num_vars: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_vars];
        for (l, f) in d.line_freq.iter().enumerate() {
            if let Some(i) = f {
                x[self.x[l]] = 1.0;
                x[self.y[l][*i]] = 1.0;
            }
        }
        for (z, &n) in d.zone_fleet.iter().enumerate() {
            x[self.n[z][n]] = 1.0;
        }
        x
    }

    /// Reads a design from binary values (rounded at 0.5).
    pub fn decode(&self, x: &[f64]) -> DesignDecision {
        DesignDecision {
            line_freq: self
                .y
                .iter()
                .map(|ys| ys.iter().position(|&j| x[j] > 0.5))
                .collect(),
            zone_fleet: self
                .n
                .iter()
                .map(|ns| ns.iter().position(|&j| x[j] > 0.5).unwrap_or(0))
                .collect(),
        }
    }

    pub fn all_binaries(&self) -> Vec<usize> {
        let mut v = self.x.clone();
        v.extend(self.y.iter().flatten());
        v.extend(self.n.iter().flatten());
        v
    }
}

/// Adds `x`, `y`, `N` and the design rows (bus budget, line linking,
/// one fleet size per zone, fleet budget) to `m`.
pub fn append_design_rows(m: &mut SolverModel, net: &MultimodalNetwork, cfg: &DesignConfig) -> DesignVars {
    let buses = bus_table(net, cfg);
    let x: Vec<usize> = net
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            let j = m.add_binary(format!("x[{}]", line.id), 0.0);
            if cfg.line_forced_open(net, l) {
                m.vars[j].lower = 1.0;
            }
            j
        })
        .collect();
    let y: Vec<Vec<usize>> = net
        .lines
        .iter()
        .map(|line| {
            cfg.frequencies
                .iter()
                .map(|f| m.add_binary(format!("y[{},{}]", line.id, f), 0.0))
                .collect()
        })
        .collect();
    let n: Vec<Vec<usize>> = net
        .zones
        .iter()
        .map(|z| {
            cfg.fleet_sizes
                .iter()
                .map(|s| m.add_binary(format!("N[{},{}]", z.id, s), 0.0))
                .collect()
        })
        .collect();
    let mut budget = Vec::new();
    for (l, ys) in y.iter().enumerate() {
        for (f, &j) in ys.iter().enumerate() {
            budget.push((j, buses[l][f] as f64));
        }
    }
    m.add_con("buses", budget, Sense::Le, cfg.bus_budget);
    for (l, ys) in y.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = ys.iter().map(|&j| (j, 1.0)).collect();
        row.push((x[l], -1.0));
        m.add_con(format!("open[{}]", net.lines[l].id), row, Sense::Eq, 0.0);
    }
    for (z, ns) in n.iter().enumerate() {
        m.add_con(
            format!("fleet_one[{}]", net.zones[z].id),
            ns.iter().map(|&j| (j, 1.0)).collect(),
            Sense::Eq,
            1.0,
        );
    }
    let mut fleet = Vec::new();
    for ns in &n {
        for (i, &j) in ns.iter().enumerate() {
            fleet.push((j, cfg.fleet_sizes[i]));
        }
    }
    m.add_con("vehicles", fleet, Sense::Le, cfg.fleet_budget);
    DesignVars { x, y, n }
}

/// A McCormick product `p = b * W` tracked for auditing. `binary` is a
/// column index when the binary is a model variable, otherwise the design
/// bit index and `fixed` holds its value.
#[derive(Debug, Clone, Copy)]
pub struct McCormickTriple {
    pub product: usize,
    pub binary: usize,
    pub wait: usize,
    pub fixed: Option<f64>,
}

/// A design binary as seen by one linearized block: a model column, or a
/// fixed value moved to the right-hand side.
#[derive(Debug, Clone, Copy)]
pub enum BinaryTerm {
    Var(usize),
    Fixed { value: f64, bit: usize },
}

/// Which design binary a McCormick product refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryRef {
    Line { line: usize, freq: usize },
    Fleet { zone: usize, size: usize },
}

/// `rhs(row) = constant + sum coef * bit` for rows whose right-hand side
/// depends on fixed design bits.
#[derive(Debug, Clone)]
pub struct AffineRhs {
    pub row: usize,
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinearizedBlock {
    pub wait_var: Vec<usize>,
    pub conservation_row: Vec<usize>,
    pub products: Vec<McCormickTriple>,
    pub rhs_forms: Vec<AffineRhs>,
}

/// Appends the assignment rows of destination `k` with every rate row
/// written over McCormick surrogates: `t[f,a,i,k]` for transit options and
/// `w[i,n,k]` for MoD options. `wbar[i]` bounds `W[i,k]`.
pub fn append_linearized_destination(
    m: &mut SolverModel,
    net: &MultimodalNetwork,
    cfg: &DesignConfig,
    cost: &[f64],
    k: usize,
    wbar: &[f64],
    binary: &dyn Fn(BinaryRef) -> BinaryTerm,
) -> Result<LinearizedBlock, DesignError> {
    let unit = ServiceRates {
        line: vec![1.0; net.lines.len()],
        zone: vec![1.0; net.zones.len()],
    };
    let p = AssignmentProblem::with_costs(net, &unit, cost.to_vec());
    let kid = net.nodes[k].id.clone();
    let lay = append_assignment_lp(m, &p, k);
    let mut products = Vec::new();
    let mut rhs_forms = Vec::new();
    let mut omega: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in 0..net.num_links() {
        let Some(kind) = option_kind(net, a) else { continue };
        let i = net.links[a].tail;
        let wb = wbar[i];
        if !wb.is_finite() {
            return Err(DesignError::MissingBound {
                node: net.nodes[i].id.clone(),
                destination: kid,
            });
        }
        let wv = lay.wait_var[i];
        let row = lay.proportion_row[a];
        m.cons[row].coeffs.retain(|&(j, _)| j != wv);
        match kind {
            OptionKind::Transit => {
                let l = net.links[a].line.unwrap();
                for (fi, &f) in cfg.frequencies.iter().enumerate() {
                    let tag = format!("{},{},{},{}", f, a, net.nodes[i].id, kid);
                    let t = m.add_var(format!("t[{}]", tag), 0.0, f64::INFINITY, 0.0);
                    m.cons[row].coeffs.push((t, -f / 60.0));
                    let b = binary(BinaryRef::Line { line: l, freq: fi });
                    products.push(add_mccormick(m, t, b, wv, wb, &tag, &mut rhs_forms));
                }
            }
            OptionKind::Road => {
                let z = net.nodes[i].zone;
                let az = cfg.zone_matching_coef(net, z);
                if !omega.contains_key(&i) {
                    let mut ws = Vec::with_capacity(cfg.fleet_sizes.len());
                    for (ni, &s) in cfg.fleet_sizes.iter().enumerate() {
                        let tag = format!("{},{},{}", net.nodes[i].id, s, kid);
                        let w = m.add_var(format!("w[{}]", tag), 0.0, f64::INFINITY, 0.0);
                        let b = binary(BinaryRef::Fleet { zone: z, size: ni });
                        products.push(add_mccormick(m, w, b, wv, wb, &tag, &mut rhs_forms));
                        ws.push(w);
                    }
                    omega.insert(i, ws);
                }
                for (ni, &s) in cfg.fleet_sizes.iter().enumerate() {
                    m.cons[row].coeffs.push((omega[&i][ni], -az * s));
                }
            }
        }
    }
    Ok(LinearizedBlock {
        wait_var: lay.wait_var,
        conservation_row: lay.conservation_row,
        products,
        rhs_forms,
    })
}

#[derive(Debug, Clone)]
pub struct DesignMilp {
    pub model: SolverModel,
    pub design: DesignVars,
    pub products: Vec<McCormickTriple>,
}

/// Full design MILP: design rows plus one linearized assignment block per
/// destination.
pub fn build_design_milp(
    net: &MultimodalNetwork,
    cfg: &DesignConfig,
    cost: &[f64],
    bounds: &WaitBounds,
) -> Result<DesignMilp, DesignError> {
    let mut m = SolverModel::new("design");
    let design = append_design_rows(&mut m, net, cfg);
    let dests = net.destinations();
    if bounds.destinations != dests {
        return Err(DesignError::MissingBound {
            node: "*".into(),
            destination: "*".into(),
        });
    }
    let lookup = |r: BinaryRef| match r {
        BinaryRef::Line { line, freq } => BinaryTerm::Var(design.y[line][freq]),
        BinaryRef::Fleet { zone, size } => BinaryTerm::Var(design.n[zone][size]),
    };
    let mut products = Vec::new();
    for (di, &k) in dests.iter().enumerate() {
        let block = append_linearized_destination(&mut m, net, cfg, cost, k, &bounds.bounds[di], &lookup)?;
        products.extend(block.products);
    }
    Ok(DesignMilp {
        model: m,
        design,
        products,
    })
}

/// The four envelope rows of `p = b W` with `0 <= W <= wbar`.
fn add_mccormick(
    m: &mut SolverModel,
    p: usize,
    b: BinaryTerm,
    w: usize,
    wbar: f64,
    tag: &str,
    forms: &mut Vec<AffineRhs>,
) -> McCormickTriple {
    match b {
        BinaryTerm::Var(bv) => {
            // wbar - W + p - wbar b >= 0
            m.add_con(format!("mc1[{}]", tag), vec![(w, -1.0), (p, 1.0), (bv, -wbar)], Sense::Ge, -wbar);
            // wbar b - p >= 0
            m.add_con(format!("mc2[{}]", tag), vec![(bv, wbar), (p, -1.0)], Sense::Ge, 0.0);
        }
        BinaryTerm::Fixed { value, bit } => {
            let r1 = m.add_con(format!("mc1[{}]", tag), vec![(w, -1.0), (p, 1.0)], Sense::Ge, -wbar + wbar * value);
            forms.push(AffineRhs {
                row: r1,
                constant: -wbar,
                terms: vec![(bit, wbar)],
            });
            let r2 = m.add_con(format!("mc2[{}]", tag), vec![(p, -1.0)], Sense::Ge, -wbar * value);
            forms.push(AffineRhs {
                row: r2,
                constant: 0.0,
                terms: vec![(bit, -wbar)],
            });
        }
    }
    // p - 0 b >= 0
    m.add_con(format!("mc3[{}]", tag), vec![(p, 1.0)], Sense::Ge, 0.0);
    // W - p >= 0
    m.add_con(format!("mc4[{}]", tag), vec![(w, 1.0), (p, -1.0)], Sense::Ge, 0.0);
    match b {
        BinaryTerm::Var(bv) => McCormickTriple {
            product: p,
            binary: bv,
            wait: w,
            fixed: None,
        },
        BinaryTerm::Fixed { value, bit } => McCormickTriple {
            product: p,
            binary: bit,
            wait: w,
            fixed: Some(value),
        },
    }
}

/// Checks `p = b W` for every tracked product at an integral solution.
pub fn audit_products(model: &SolverModel, products: &[McCormickTriple], x: &[f64], tol: f64) -> McCormickReport {
    let mut rep = McCormickReport::default();
    for t in products {
        let b = t.fixed.unwrap_or_else(|| x[t.binary]).round();
        let expected = b * x[t.wait];
        let actual = x[t.product];
        let err = (expected - actual).abs();
        rep.checked += 1;
        rep.max_error = rep.max_error.max(err);
        if err > tol * (1.0 + expected.abs()) {
            rep.violations.push(McCormickViolation {
                product: model.vars[t.product].name.clone(),
                expected,
                actual,
            });
        }
    }
    rep
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct McCormickReport {
    pub checked: usize,
    pub violations: Vec<McCormickViolation>,
    pub max_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McCormickViolation {
    pub product: String,
    pub expected: f64,
    pub actual: f64,
}

pub fn validate_mccormick_exactness(milp: &DesignMilp, x: &[f64], tol: f64) -> McCormickReport {
    audit_products(&milp.model, &milp.products, x, tol)
}

/// Every feasible design, in lexicographic order of the encoding.
pub fn enumerate_designs(net: &MultimodalNetwork, cfg: &DesignConfig) -> Vec<DesignDecision> {
    let nl = net.lines.len();
    let nz = net.zones.len();
    let mut line_choices: Vec<Vec<Option<usize>>> = Vec::with_capacity(nl);
    for l in 0..nl {
        let mut c: Vec<Option<usize>> = Vec::new();
        if !cfg.line_forced_open(net, l) {
            c.push(None);
        }
        c.extend((0..cfg.frequencies.len()).map(Some));
        line_choices.push(c);
    }
    let mut out = Vec::new();
    let mut lf = vec![0usize; nl];
    loop {
        let line_freq: Vec<Option<usize>> = (0..nl).map(|l| line_choices[l][lf[l]]).collect();
        let probe = DesignDecision {
            line_freq: line_freq.clone(),
            zone_fleet: vec![cfg.min_fleet_index(); nz],
        };
        if probe.buses(net, cfg) as f64 <= cfg.bus_budget + 1e-9 {
            let mut zf = vec![0usize; nz];
            loop {
                let d = DesignDecision {
                    line_freq: line_freq.clone(),
                    zone_fleet: zf.clone(),
                };
                if d.vehicles(cfg) <= cfg.fleet_budget + 1e-9 {
                    out.push(d);
                }
                if !advance(&mut zf, |_| cfg.fleet_sizes.len()) {
                    break;
                }
            }
        }
        if !advance(&mut lf, |l| line_choices[l].len()) {
            break;
        }
    }
    out
}

fn advance(idx: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for p in (0..idx.len()).rev() {
        idx[p] += 1;
        if idx[p] < radix(p) {
            return true;
        }
        idx[p] = 0;
    }
    false
}

/// Draws a feasible design: independent uniform choices, repaired by
/// closing lines / shrinking fleets until the budgets hold.
pub fn random_design<R: rand::Rng>(net: &MultimodalNetwork, cfg: &DesignConfig, rng: &mut R) -> DesignDecision {
    let nf = cfg.frequencies.len();
    let mut d = DesignDecision {
        line_freq: (0..net.lines.len())
            .map(|l| {
                let forced = cfg.line_forced_open(net, l);
                let choice = rng.gen_range(0..nf + usize::from(!forced));
                if choice == nf {
                    None
                } else {
                    Some(choice)
                }
            })
            .collect(),
        zone_fleet: (0..net.zones.len())
            .map(|_| rng.gen_range(0..cfg.fleet_sizes.len()))
            .collect(),
    };
    let f0 = cfg.min_frequency_index();
    let n0 = cfg.min_fleet_index();
    while d.buses(net, cfg) as f64 > cfg.bus_budget + 1e-9 {
        let open: Vec<usize> = (0..net.lines.len())
            .filter(|&l| d.line_freq[l].is_some() && (d.line_freq[l] != Some(f0) || !cfg.line_forced_open(net, l)))
            .collect();
        if open.is_empty() {
            break;
        }
        let l = open[rng.gen_range(0..open.len())];
        d.line_freq[l] = if cfg.line_forced_open(net, l) { Some(f0) } else { None };
    }
    while d.vehicles(cfg) > cfg.fleet_budget + 1e-9 {
        let big: Vec<usize> = (0..net.zones.len()).filter(|&z| d.zone_fleet[z] != n0).collect();
        if big.is_empty() {
            break;
        }
        let z = big[rng.gen_range(0..big.len())];
        d.zone_fleet[z] = n0;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bus_count_examples() {
        assert_eq!(buses_required(30.0, 12.0), 12);
        assert_eq!(buses_required(25.0, 3.0), 3);
        assert_eq!(buses_required(25.0, 2.0), 2);
        assert_eq!(buses_required(26.0, 2.0), 2);
        assert_eq!(buses_required(31.0, 2.0), 3);
    }

    #[test]
    fn defaults_validate() {
        let c = DesignConfig::default();
        c.validate().unwrap();
        assert_eq!(c.frequencies, vec![2.0, 3.0, 4.0, 6.0, 12.0]);
        assert_eq!(c.bus_budget, 70.0);
        let bad = DesignConfig {
            frequencies: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_parses_from_toml_with_defaults() {
        let c: DesignConfig = toml::from_str("bus_budget = 25\nfleet_sizes = [0.01, 100]\n").unwrap();
        assert_eq!(c.bus_budget, 25.0);
        assert_eq!(c.fleet_sizes, vec![0.01, 100.0]);
        assert_eq!(c.value_of_time, 23.0);
        assert!(toml::from_str::<DesignConfig>("nonsense = 1").is_err());
    }
}
