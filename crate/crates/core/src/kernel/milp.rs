//! Branch and bound over binary variables.
//!
//! A single tableau is kept for the whole search; each node re-applies its
//! binary bounds and re-optimizes with the dual simplex. Nodes are explored
//! depth first with a periodic jump to the best open bound. With
//! `pool_size > 1` the search keeps going after an integral node by splitting
//! its region into the disjoint "alternative" subregions, so that the best
//! few binary patterns are collected.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use super::simplex::{LpOptions, Outcome, Tableau};
use super::SolverModel;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub lp: LpOptions,
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    /// Number of solutions to keep. 1 disables the pool.
    pub pool_size: usize,
    /// Relative gap to the incumbent within which pool solutions are kept.
    pub pool_gap: f64,
    pub integrality_tol: f64,
    /// Nodes whose bound is within this relative gap of the incumbent are pruned.
    pub relative_gap: f64,
    /// Nodes between jumps to the best open bound.
    pub restart_interval: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            lp: LpOptions::default(),
            time_limit: None,
            node_limit: 2_000_000,
            pool_size: 1,
            pool_gap: 0.0,
            integrality_tol: 1e-6,
            relative_gap: 1e-9,
            restart_interval: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct PoolSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub best_bound: f64,
    pub nodes: usize,
    pub branches: usize,
    pub lp_iterations: usize,
    /// Best solutions found, sorted by objective. The first entry is the incumbent.
    pub pool: Vec<PoolSolution>,
}

impl MilpResult {
    pub fn has_solution(&self) -> bool {
        !self.x.is_empty()
    }

    pub fn gap(&self) -> f64 {
        if !self.has_solution() {
            return f64::INFINITY;
        }
        (self.objective - self.best_bound).max(0.0) / self.objective.abs().max(1e-10)
    }
}

struct Node {
    /// Binary fixings `(var, value)` relative to the root bounds.
    fixes: Vec<(usize, f64)>,
    bound: f64,
}

pub fn solve_milp(model: &SolverModel, opts: &MilpOptions) -> MilpResult {
    let start = Instant::now();
    let n = model.num_vars();
    let binaries: Vec<usize> = model.binaries().collect();
    let empty = |status| MilpResult {
        status,
        objective: f64::INFINITY,
        x: Vec::new(),
        best_bound: f64::NEG_INFINITY,
        nodes: 0,
        branches: 0,
        lp_iterations: 0,
        pool: Vec::new(),
    };
    if let Err(msg) = model.validate() {
        log::warn!("rejecting malformed model {}: {}", model.name, msg);
        return empty(MilpStatus::NumericalFailure);
    }
    let root_lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let root_upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    let mut cur_lower = root_lower.clone();
    let mut cur_upper = root_upper.clone();

    let mut tab = Tableau::new(model, opts.lp.clone());
    let check_tol = 1e-6 * (1.0 + model.cons.iter().fold(0.0f64, |acc, c| acc.max(c.rhs.abs())));
    let mut stack: Vec<Node> = vec![Node {
        fixes: Vec::new(),
        bound: f64::NEG_INFINITY,
    }];
    let mut first = true;
    let mut pool: Vec<PoolSolution> = Vec::new();
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut nodes = 0usize;
    let mut branches = 0usize;
    let mut since_restart = 0usize;
    let mut lp_iterations = 0usize;
    let mut limit_hit: Option<MilpStatus> = None;
    let pool_mode = opts.pool_size > 1;

    while !stack.is_empty() {
        if let Some(tl) = opts.time_limit {
            if start.elapsed() >= tl {
                limit_hit = Some(MilpStatus::TimeLimit);
                break;
            }
        }
        if nodes >= opts.node_limit {
            limit_hit = Some(MilpStatus::NodeLimit);
            break;
        }
        since_restart += 1;
        if since_restart >= opts.restart_interval {
            since_restart = 0;
            let best = (0..stack.len())
                .min_by(|&a, &b| stack[a].bound.total_cmp(&stack[b].bound))
                .unwrap();
            let last = stack.len() - 1;
            stack.swap(best, last);
        }
        let node = stack.pop().unwrap();
        let threshold = prune_threshold(&pool, opts);
        if node.bound >= threshold {
            continue;
        }
        nodes += 1;

        // apply node bounds
        let mut want_lower = root_lower.clone();
        let mut want_upper = root_upper.clone();
        for &(j, v) in &node.fixes {
            want_lower[j] = v;
            want_upper[j] = v;
        }
        let rebuild = |tab: &mut Tableau, lp_iterations: &mut usize| {
            let mut m2 = model.clone();
            for j in 0..n {
                m2.vars[j].lower = want_lower[j];
                m2.vars[j].upper = want_upper[j];
            }
            *lp_iterations += tab.iterations;
            *tab = Tableau::new(&m2, opts.lp.clone());
            tab.optimize_from_scratch()
        };
        let outcome = if first {
            first = false;
            tab.optimize_from_scratch()
        } else {
            for &j in &binaries {
                if want_lower[j] != cur_lower[j] || want_upper[j] != cur_upper[j] {
                    tab.set_bounds(j, want_lower[j], want_upper[j]);
                }
            }
            // warm starts drift; confirm every verdict against the rows
            let mut o = tab.reoptimize();
            if o == Outcome::Done && model.max_violation(&tab.structural_values()) > check_tol {
                o = tab.repair();
            }
            if o == Outcome::Infeasible && !tab.certify_infeasible() {
                o = tab.repair();
            }
            let bad = o == Outcome::Done && model.max_violation(&tab.structural_values()) > check_tol;
            if o == Outcome::IterationLimit || bad {
                rebuild(&mut tab, &mut lp_iterations)
            } else {
                o
            }
        };
        cur_lower = want_lower;
        cur_upper = want_upper;
        match outcome {
            Outcome::Done => {}
            Outcome::Infeasible => continue,
            Outcome::Unbounded => {
                if nodes == 1 {
                    let mut r = empty(MilpStatus::Unbounded);
                    r.nodes = nodes;
                    return r;
                }
                continue;
            }
            Outcome::IterationLimit => {
                limit_hit = Some(MilpStatus::NumericalFailure);
                break;
            }
        }
        let x = tab.structural_values();
        let obj = tab.objective() + model.objective_offset;
        if obj >= prune_threshold(&pool, opts) {
            continue;
        }
        // most fractional binary
        let mut branch_var = usize::MAX;
        let mut best_frac = opts.integrality_tol;
        for &j in &binaries {
            let f = (x[j] - x[j].round()).abs();
            if f > best_frac + 1e-12 {
                best_frac = f;
                branch_var = j;
            }
        }
        if branch_var == usize::MAX {
            let mut sol = x.clone();
            for &j in &binaries {
                sol[j] = sol[j].round();
            }
            if model.max_violation(&sol) > check_tol {
                // rounding moved the point; settle the continuous part
                let mut fixed = model.clone();
                for &j in &binaries {
                    fixed.vars[j].lower = sol[j];
                    fixed.vars[j].upper = sol[j];
                }
                let r = super::solve_lp(&fixed, &opts.lp);
                if r.status != super::LpStatus::Optimal {
                    continue;
                }
                sol = r.x;
                for &j in &binaries {
                    sol[j] = sol[j].round();
                }
            }
            let key: Vec<bool> = binaries.iter().map(|&j| sol[j] > 0.5).collect();
            if seen.insert(key) {
                let objective = model.objective_value(&sol);
                insert_pool(&mut pool, PoolSolution { objective, x: sol.clone() }, opts);
            }
            if pool_mode {
                // split the rest of this region into disjoint alternatives
                let free: Vec<usize> = binaries
                    .iter()
                    .copied()
                    .filter(|&j| cur_lower[j] < cur_upper[j])
                    .collect();
                let mut prefix = node.fixes.clone();
                let mut children = Vec::with_capacity(free.len());
                for &j in &free {
                    let mut fixes = prefix.clone();
                    fixes.push((j, 1.0 - sol[j]));
                    children.push(Node { fixes, bound: obj });
                    prefix.push((j, sol[j]));
                }
                branches += children.len();
                // the first alternative is popped first
                while let Some(c) = children.pop() {
                    stack.push(c);
                }
            }
            continue;
        }
        branches += 1;
        let v = x[branch_var];
        let mut down = node.fixes.clone();
        down.push((branch_var, 0.0));
        let mut up = node.fixes;
        up.push((branch_var, 1.0));
        if v >= 0.5 {
            stack.push(Node { fixes: down, bound: obj });
            stack.push(Node { fixes: up, bound: obj });
        } else {
            stack.push(Node { fixes: up, bound: obj });
            stack.push(Node { fixes: down, bound: obj });
        }
    }
    lp_iterations += tab.iterations;

    let status;
    let best_bound;
    if let Some(s) = limit_hit {
        status = if pool.is_empty() && s == MilpStatus::NumericalFailure {
            MilpStatus::NumericalFailure
        } else {
            s
        };
        let open = stack
            .iter()
            .map(|nd| nd.bound)
            .fold(f64::INFINITY, f64::min);
        let inc = pool.first().map(|p| p.objective).unwrap_or(f64::INFINITY);
        best_bound = open.min(inc);
    } else if pool.is_empty() {
        let mut r = empty(MilpStatus::Infeasible);
        r.nodes = nodes;
        r.branches = branches;
        r.lp_iterations = lp_iterations;
        return r;
    } else {
        status = MilpStatus::Optimal;
        best_bound = pool[0].objective;
    }
    let (objective, x) = match pool.first() {
        Some(p) => (p.objective, p.x.clone()),
        None => (f64::INFINITY, Vec::new()),
    };
    MilpResult {
        status,
        objective,
        x,
        best_bound,
        nodes,
        branches,
        lp_iterations,
        pool,
    }
}

fn prune_threshold(pool: &[PoolSolution], opts: &MilpOptions) -> f64 {
    let Some(best) = pool.first() else {
        return f64::INFINITY;
    };
    let inc = best.objective;
    let gap_tol = opts.relative_gap * inc.abs().max(1.0);
    if opts.pool_size <= 1 {
        return inc - gap_tol;
    }
    let mut t = inc + opts.pool_gap * inc.abs();
    if pool.len() >= opts.pool_size {
        t = t.min(pool.last().unwrap().objective - gap_tol);
    }
    t.max(inc - gap_tol)
}

fn insert_pool(pool: &mut Vec<PoolSolution>, sol: PoolSolution, opts: &MilpOptions) {
    let pos = pool
        .iter()
        .position(|p| p.objective > sol.objective)
        .unwrap_or(pool.len());
    pool.insert(pos, sol);
    let keep = opts.pool_size.max(1);
    pool.truncate(keep);
    if opts.pool_size > 1 {
        let best = pool[0].objective;
        let limit = best + opts.pool_gap * best.abs() + 1e-9 * best.abs().max(1.0);
        pool.retain(|p| p.objective <= limit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Sense;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> SolverModel {
        let mut m = SolverModel::new("knap");
        let ids: Vec<usize> = values
            .iter()
            .enumerate()
            .map(|(i, v)| m.add_binary(format!("x{}", i), -v))
            .collect();
        m.add_con(
            "cap",
            ids.iter().zip(weights).map(|(&j, &w)| (j, w)).collect(),
            Sense::Le,
            cap,
        );
        m
    }

    fn enumerate(values: &[f64], weights: &[f64], cap: f64) -> f64 {
        let k = values.len();
        let mut best = 0.0f64;
        for mask in 0..(1u32 << k) {
            let (mut v, mut w) = (0.0, 0.0);
            for i in 0..k {
                if mask >> i & 1 == 1 {
                    v += values[i];
                    w += weights[i];
                }
            }
            if w <= cap + 1e-12 {
                best = best.max(v);
            }
        }
        -best
    }

    #[test]
    fn three_item_knapsack_matches_enumeration() {
        let values = [10.0, 13.0, 7.0];
        let weights = [4.0, 6.0, 3.0];
        let m = knapsack(&values, &weights, 9.0);
        let r = solve_milp(&m, &MilpOptions::default());
        assert_eq!(r.status, MilpStatus::Optimal);
        assert!((r.objective - enumerate(&values, &weights, 9.0)).abs() < 1e-9);
    }

    #[test]
    fn larger_knapsacks_match_enumeration() {
        let values = [12.0, 7.5, 9.0, 4.0, 11.0, 3.5, 8.0, 6.0, 10.0, 5.0];
        let weights = [5.0, 3.0, 4.5, 2.0, 6.0, 1.5, 4.0, 3.5, 5.5, 2.5];
        for cap in [3.0, 7.0, 12.0, 17.5, 25.0] {
            let m = knapsack(&values, &weights, cap);
            let r = solve_milp(&m, &MilpOptions::default());
            assert_eq!(r.status, MilpStatus::Optimal);
            assert!(
                (r.objective - enumerate(&values, &weights, cap)).abs() < 1e-9,
                "cap {}",
                cap
            );
        }
    }

    #[test]
    fn integral_root_needs_no_branching() {
        let m = knapsack(&[1.0, 1.0], &[1.0, 1.0], 2.0);
        let r = solve_milp(&m, &MilpOptions::default());
        assert_eq!(r.status, MilpStatus::Optimal);
        assert_eq!(r.branches, 0);
        assert_eq!(r.nodes, 1);
    }

    #[test]
    fn symmetric_pool_returns_both_optima() {
        // choose exactly one of two identical items
        let mut m = SolverModel::new("sym");
        let a = m.add_binary("a", 1.0);
        let b = m.add_binary("b", 1.0);
        m.add_con("one", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.0);
        let opts = MilpOptions {
            pool_size: 2,
            pool_gap: 0.01,
            ..Default::default()
        };
        let r = solve_milp(&m, &opts);
        assert_eq!(r.status, MilpStatus::Optimal);
        assert_eq!(r.pool.len(), 2);
        assert!(r.pool.iter().all(|p| (p.objective - 1.0).abs() < 1e-9));
        assert_ne!(r.pool[0].x, r.pool[1].x);
    }

    #[test]
    fn infeasible_milp() {
        let mut m = SolverModel::new("inf");
        let a = m.add_binary("a", 1.0);
        let b = m.add_binary("b", 1.0);
        m.add_con("half", vec![(a, 2.0), (b, 2.0)], Sense::Eq, 1.0);
        assert_eq!(solve_milp(&m, &MilpOptions::default()).status, MilpStatus::Infeasible);
    }

    #[test]
    fn mixed_continuous_and_binary() {
        // facility: open y (cost 5) to allow x <= 10 y, x >= 4 demand, x cost 1
        let mut m = SolverModel::new("fl");
        let y1 = m.add_binary("y1", 5.0);
        let y2 = m.add_binary("y2", 3.0);
        let x1 = m.add_var("x1", 0.0, f64::INFINITY, 1.0);
        let x2 = m.add_var("x2", 0.0, f64::INFINITY, 2.0);
        m.add_con("c1", vec![(x1, 1.0), (y1, -10.0)], Sense::Le, 0.0);
        m.add_con("c2", vec![(x2, 1.0), (y2, -10.0)], Sense::Le, 0.0);
        m.add_con("d", vec![(x1, 1.0), (x2, 1.0)], Sense::Ge, 4.0);
        let r = solve_milp(&m, &MilpOptions::default());
        assert_eq!(r.status, MilpStatus::Optimal);
        // y1: 5 + 4 = 9 ; y2: 3 + 8 = 11
        assert!((r.objective - 9.0).abs() < 1e-9);
    }
}
