//! Bounded-variable primal and dual simplex on a dense tableau.
//!
//! Structural columns are scaled by powers of two (`x_j = c_j x'_j`, from a
//! few rounds of geometric-mean scaling), then every row `a_i'x (<=,>=,=) b_i`
//! is scaled to `max_j |a_ij c_j| = 1` and receives a slack column, giving
//! `s_i a_i'x + sigma_i = s_i b_i` with the slack bounds encoding the row
//! sense. The tableau stores `B^-1 [sA | I | sb]` row-major
//! together with the reduced-cost row. Nonbasic variables sit at a bound (or
//! at zero when free).
//!
//! Phase 1 minimizes the sum of basic bound violations with recomputed
//! composite costs; phase 2 uses Dantzig pricing with a Harris ratio test and
//! falls back to Bland's rule after a run of degenerate pivots. The dual
//! simplex is used to re-optimize after bound changes (branch and bound).

use super::{Sense, SolverModel};

const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iterations: 200_000,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_interval: 100,
            degenerate_limit: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    /// Primal values of the structural variables.
    pub x: Vec<f64>,
    /// One dual per row, `d objective / d rhs`. Nonpositive on binding `<=`
    /// rows and nonnegative on binding `>=` rows.
    pub duals: Vec<f64>,
    /// `c_j - sum_i y_i a_ij` for every structural variable.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Solves the continuous relaxation of `model` (integrality marks ignored).
pub fn solve_lp(model: &SolverModel, opts: &LpOptions) -> LpResult {
    if let Err(msg) = model.validate() {
        log::warn!("rejecting malformed model {}: {}", model.name, msg);
        return LpResult {
            status: LpStatus::NumericalFailure,
            objective: f64::NAN,
            x: vec![0.0; model.num_vars()],
            duals: vec![0.0; model.num_cons()],
            reduced_costs: vec![0.0; model.num_vars()],
            iterations: 0,
        };
    }
    let mut tab = Tableau::new(model, opts.clone());
    let status = tab.optimize_from_scratch();
    tab.result(model, status)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Done,
    Infeasible,
    Unbounded,
    IterationLimit,
}

pub(crate) struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    /// Row stride: `ncols` plus the transformed right-hand side.
    w: usize,
    rows: Vec<Vec<(usize, f64)>>,
    scale: Vec<f64>,
    /// Column scale of each structural variable.
    col: Vec<f64>,
    rhs: Vec<f64>,
    t: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    basic_row: Vec<usize>,
    d: Vec<f64>,
    opts: LpOptions,
    since_refactor: usize,
    pub(crate) iterations: usize,
    scratch: Vec<(usize, f64)>,
    /// Row on which the dual method last found no entering column.
    infeasible_row: Option<usize>,
}

impl Tableau {
    pub(crate) fn new(model: &SolverModel, opts: LpOptions) -> Self {
        let m = model.num_cons();
        let n = model.num_vars();
        let ncols = n + m;
        let w = ncols + 1;
        let mut rows = Vec::with_capacity(m);
        let mut scale = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(ncols);
        let mut upper = Vec::with_capacity(ncols);
        let mut cost = Vec::with_capacity(ncols);
        let mut merged_rows = Vec::with_capacity(m);
        for c in &model.cons {
            // merge duplicate column entries
            let mut coeffs: Vec<(usize, f64)> = c.coeffs.clone();
            coeffs.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
            for (j, a) in coeffs {
                match merged.last_mut() {
                    Some((lj, la)) if *lj == j => *la += a,
                    _ => merged.push((j, a)),
                }
            }
            merged.retain(|&(_, a)| a != 0.0);
            merged_rows.push(merged);
        }
        let col = column_scales(&merged_rows, n);
        for (j, v) in model.vars.iter().enumerate() {
            lower.push(v.lower / col[j]);
            upper.push(v.upper / col[j]);
            cost.push(v.cost * col[j]);
        }
        for (c, mut merged) in model.cons.iter().zip(merged_rows) {
            for e in merged.iter_mut() {
                e.1 *= col[e.0];
            }
            let amax = merged.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
            let s = if amax > 0.0 { 1.0 / amax } else { 1.0 };
            for e in merged.iter_mut() {
                e.1 *= s;
            }
            rows.push(merged);
            scale.push(s);
            rhs.push(c.rhs * s);
            let (lo, up) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(up);
            cost.push(0.0);
        }
        let mut tab = Tableau {
            m,
            n,
            ncols,
            w,
            rows,
            scale,
            col,
            rhs,
            t: vec![0.0; m * w],
            cost,
            lower,
            upper,
            x: vec![0.0; ncols],
            head: (n..n + m).collect(),
            basic_row: vec![NONBASIC; ncols],
            d: vec![0.0; ncols],
            opts,
            since_refactor: 0,
            iterations: 0,
            scratch: Vec::new(),
            infeasible_row: None,
        };
        for i in 0..m {
            tab.basic_row[n + i] = i;
        }
        for j in 0..n {
            tab.x[j] = initial_value(tab.lower[j], tab.upper[j]);
        }
        tab.load_identity_basis();
        tab
    }

    fn load_identity_basis(&mut self) {
        let (m, n, w) = (self.m, self.n, self.w);
        self.t.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for &(j, a) in &self.rows[i] {
                self.t[i * w + j] = a;
            }
            self.t[i * w + n + i] = 1.0;
            self.t[i * w + self.ncols] = self.rhs[i];
        }
        self.recompute_basic_values();
        self.recompute_reduced_costs();
    }

    fn recompute_basic_values(&mut self) {
        let w = self.w;
        for i in 0..self.m {
            let row = &self.t[i * w..(i + 1) * w];
            let mut v = row[self.ncols];
            for j in 0..self.ncols {
                if self.basic_row[j] == NONBASIC {
                    let a = row[j];
                    if a != 0.0 {
                        v -= a * self.x[j];
                    }
                }
            }
            self.x[self.head[i]] = v;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let w = self.w;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.head[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..i * w + self.ncols];
                for (dj, a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.head[i]] = 0.0;
        }
    }

    /// Rebuilds `B^-1 [sA | I | sb]` from the original rows for the current
    /// basis. Basis columns that turn out dependent are swapped for slacks.
    pub(crate) fn refactor(&mut self) {
        let (m, n, w) = (self.m, self.n, self.w);
        let wanted: Vec<usize> = self.head.clone();
        self.t.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for &(j, a) in &self.rows[i] {
                self.t[i * w + j] = a;
            }
            self.t[i * w + n + i] = 1.0;
            self.t[i * w + self.ncols] = self.rhs[i];
        }
        for j in 0..self.ncols {
            self.basic_row[j] = NONBASIC;
        }
        let mut assigned = vec![false; m];
        let mut new_head = vec![NONBASIC; m];
        let mut dropped = Vec::new();
        // slacks first: they are cheap and keep the elimination sparse
        let mut order = wanted.clone();
        order.sort_by_key(|&q| if q >= n { 0 } else { 1 });
        for q in order {
            let mut best = NONBASIC;
            let mut best_val = 1e-11;
            for i in 0..m {
                if !assigned[i] {
                    let v = self.t[i * w + q].abs();
                    if v > best_val {
                        best_val = v;
                        best = i;
                    }
                }
            }
            if best == NONBASIC {
                dropped.push(q);
                continue;
            }
            self.gauss_jordan(best, q, false);
            assigned[best] = true;
            new_head[best] = q;
            self.basic_row[q] = best;
        }
        for i in 0..m {
            if !assigned[i] {
                // pick the nonbasic column with the largest entry in this row
                let mut best = NONBASIC;
                let mut best_val = 1e-12;
                for j in (0..self.ncols).rev() {
                    if self.basic_row[j] == NONBASIC {
                        let v = self.t[i * w + j].abs();
                        if v > best_val {
                            best_val = v;
                            best = j;
                        }
                    }
                }
                let q = if best == NONBASIC { n + i } else { best };
                self.gauss_jordan(i, q, false);
                assigned[i] = true;
                new_head[i] = q;
                self.basic_row[q] = i;
            }
        }
        for q in dropped {
            if self.basic_row[q] == NONBASIC {
                self.x[q] = nearest_bound(self.lower[q], self.upper[q], self.x[q]);
            }
        }
        self.head = new_head;
        self.recompute_basic_values();
        self.recompute_reduced_costs();
        self.since_refactor = 0;
    }

    /// Pivot on `(r, q)` updating the tableau, and optionally the reduced costs.
    fn gauss_jordan(&mut self, r: usize, q: usize, update_d: bool) {
        let w = self.w;
        let piv = self.t[r * w + q];
        let inv = 1.0 / piv;
        self.scratch.clear();
        for k in 0..w {
            let v = self.t[r * w + k];
            if v != 0.0 {
                let nv = v * inv;
                if nv.abs() > 1e-14 || k == self.ncols {
                    self.t[r * w + k] = nv;
                    self.scratch.push((k, nv));
                } else {
                    self.t[r * w + k] = 0.0;
                }
            }
        }
        self.t[r * w + q] = 1.0;
        let prow = std::mem::take(&mut self.scratch);
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + q];
            if f != 0.0 {
                let row = &mut self.t[i * w..(i + 1) * w];
                for &(k, v) in &prow {
                    row[k] -= f * v;
                }
                row[q] = 0.0;
            }
        }
        if update_d {
            let f = self.d[q];
            if f != 0.0 {
                for &(k, v) in &prow {
                    if k < self.ncols {
                        self.d[k] -= f * v;
                    }
                }
            }
            self.d[q] = 0.0;
        }
        self.scratch = prow;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        self.gauss_jordan(r, q, true);
        let leaving = self.head[r];
        self.basic_row[leaving] = NONBASIC;
        self.head[r] = q;
        self.basic_row[q] = r;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= self.opts.refactor_interval {
            self.refactor();
        }
    }

    /// Moves nonbasic `q` to `value`, updating the basic variables.
    fn move_nonbasic(&mut self, q: usize, value: f64) {
        let delta = value - self.x[q];
        if delta != 0.0 {
            let w = self.w;
            for i in 0..self.m {
                let a = self.t[i * w + q];
                if a != 0.0 {
                    self.x[self.head[i]] -= a * delta;
                }
            }
        }
        self.x[q] = value;
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.upper[j] - self.lower[j] <= 0.0
    }

    /// Direction in which nonbasic `j` may profitably move under reduced
    /// costs `d`, or 0.
    fn improving_direction(&self, j: usize, dj: f64) -> f64 {
        let tol = self.opts.optimality_tol;
        if self.is_fixed(j) {
            return 0.0;
        }
        let at_lower = self.x[j] <= self.lower[j];
        let at_upper = self.x[j] >= self.upper[j];
        if dj < -tol && !at_upper {
            1.0
        } else if dj > tol && !at_lower {
            -1.0
        } else {
            0.0
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let tol = self.opts.feasibility_tol * (1.0 + v.abs().min(1e6) * 1e-3);
        if v < self.lower[j] - tol {
            self.lower[j] - v
        } else if v > self.upper[j] + tol {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible_rows(&self) -> bool {
        (0..self.m).any(|i| self.infeasibility(self.head[i]) > 0.0)
    }

    pub(crate) fn optimize_from_scratch(&mut self) -> Outcome {
        match self.phase_one() {
            Outcome::Done => {}
            other => return other,
        }
        self.primal()
    }

    /// Composite phase 1: minimize the sum of bound violations of basics.
    fn phase_one(&mut self) -> Outcome {
        let w = self.w;
        let mut d1 = vec![0.0; self.ncols];
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::IterationLimit;
            }
            let mut cb = vec![0.0; self.m];
            let mut any = false;
            for i in 0..self.m {
                let j = self.head[i];
                let v = self.x[j];
                let tol = self.opts.feasibility_tol;
                if v < self.lower[j] - tol {
                    cb[i] = -1.0;
                    any = true;
                } else if v > self.upper[j] + tol {
                    cb[i] = 1.0;
                    any = true;
                }
            }
            if !any {
                return Outcome::Done;
            }
            d1.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..self.m {
                if cb[i] != 0.0 {
                    let row = &self.t[i * w..i * w + self.ncols];
                    for (dj, a) in d1.iter_mut().zip(row) {
                        *dj -= cb[i] * a;
                    }
                }
            }
            let bland = degenerate_run >= self.opts.degenerate_limit;
            let mut entering = NONBASIC;
            let mut best = 0.0;
            let mut dir = 0.0;
            for j in 0..self.ncols {
                if self.basic_row[j] != NONBASIC {
                    continue;
                }
                let dj = d1[j];
                let dd = if self.lower[j] == f64::NEG_INFINITY && self.upper[j] == f64::INFINITY {
                    if dj.abs() > self.opts.optimality_tol {
                        -dj.signum()
                    } else {
                        0.0
                    }
                } else {
                    self.improving_direction(j, dj)
                };
                if dd != 0.0 {
                    if bland {
                        entering = j;
                        dir = dd;
                        break;
                    }
                    if dj.abs() > best {
                        best = dj.abs();
                        entering = j;
                        dir = dd;
                    }
                }
            }
            if entering == NONBASIC {
                return Outcome::Infeasible;
            }
            let q = entering;
            // ratio test: feasible basics block at their bounds, infeasible
            // basics block when they reach the violated bound
            let ftol = self.opts.feasibility_tol;
            let mut theta = if self.lower[q].is_finite() && self.upper[q].is_finite() {
                self.upper[q] - self.lower[q]
            } else {
                f64::INFINITY
            };
            let mut leave = NONBASIC;
            let mut leave_alpha = 0.0;
            let mut leave_bound = 0.0;
            for i in 0..self.m {
                let a = self.t[i * w + q];
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let j = self.head[i];
                let g = -a * dir;
                let v = self.x[j];
                let (ratio, bound) = if g < 0.0 {
                    if v > self.upper[j] + ftol {
                        ((v - self.upper[j]) / -g, self.upper[j])
                    } else if self.lower[j].is_finite() && v >= self.lower[j] - ftol {
                        (((v - self.lower[j]).max(0.0)) / -g, self.lower[j])
                    } else {
                        continue;
                    }
                } else if v < self.lower[j] - ftol {
                    ((self.lower[j] - v) / g, self.lower[j])
                } else if self.upper[j].is_finite() && v <= self.upper[j] + ftol {
                    (((self.upper[j] - v).max(0.0)) / g, self.upper[j])
                } else {
                    continue;
                };
                let better = if bland {
                    ratio < theta - 1e-12
                        || (leave != NONBASIC
                            && (ratio - theta).abs() <= 1e-12
                            && j < self.head[leave])
                } else {
                    ratio < theta - 1e-12
                        || ((ratio - theta).abs() <= 1e-12 && a.abs() > leave_alpha)
                };
                if better {
                    theta = ratio;
                    leave = i;
                    leave_alpha = a.abs();
                    leave_bound = bound;
                }
            }
            if theta == f64::INFINITY {
                // only infeasible basics move away; cannot happen with a
                // strictly improving phase-1 direction unless unbounded ray
                return Outcome::Infeasible;
            }
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.take_step(q, dir, theta, leave, leave_bound);
        }
    }

    /// Moves entering `q` by `dir*theta`; pivots `q` into row `leave` (whose
    /// basic variable is set to `leave_bound`), or performs a bound flip.
    fn take_step(&mut self, q: usize, dir: f64, theta: f64, leave: usize, leave_bound: f64) {
        let w = self.w;
        if theta != 0.0 {
            for i in 0..self.m {
                let a = self.t[i * w + q];
                if a != 0.0 {
                    self.x[self.head[i]] -= a * dir * theta;
                }
            }
            self.x[q] += dir * theta;
        }
        if leave == NONBASIC {
            // bound flip
            self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            self.iterations += 1;
            return;
        }
        let p = self.head[leave];
        self.x[p] = leave_bound;
        self.pivot(leave, q);
    }

    /// Phase 2 primal simplex from a primal feasible basis.
    pub(crate) fn primal(&mut self) -> Outcome {
        let w = self.w;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::IterationLimit;
            }
            let bland = degenerate_run >= self.opts.degenerate_limit;
            let mut entering = NONBASIC;
            let mut best = 0.0;
            let mut dir = 0.0;
            for j in 0..self.ncols {
                if self.basic_row[j] != NONBASIC {
                    continue;
                }
                let dj = self.d[j];
                let dd = if self.lower[j] == f64::NEG_INFINITY && self.upper[j] == f64::INFINITY {
                    if dj.abs() > self.opts.optimality_tol {
                        -dj.signum()
                    } else {
                        0.0
                    }
                } else {
                    self.improving_direction(j, dj)
                };
                if dd != 0.0 {
                    if bland {
                        entering = j;
                        dir = dd;
                        break;
                    }
                    if dj.abs() > best {
                        best = dj.abs();
                        entering = j;
                        dir = dd;
                    }
                }
            }
            if entering == NONBASIC {
                if self.primal_infeasible_rows() {
                    // drifted out of feasibility; repair and continue
                    self.refactor();
                    match self.phase_one() {
                        Outcome::Done => {
                            if self.primal_infeasible_rows() {
                                return Outcome::Infeasible;
                            }
                            continue;
                        }
                        other => return other,
                    }
                }
                return Outcome::Done;
            }
            let q = entering;
            let ftol = self.opts.feasibility_tol;
            let own_range = if self.lower[q].is_finite() && self.upper[q].is_finite() {
                self.upper[q] - self.lower[q]
            } else {
                f64::INFINITY
            };
            // Harris pass 1
            let mut theta_max = f64::INFINITY;
            for i in 0..self.m {
                let a = self.t[i * w + q];
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let j = self.head[i];
                let g = -a * dir;
                let v = self.x[j];
                let r = if g < 0.0 {
                    if !self.lower[j].is_finite() {
                        continue;
                    }
                    (v - self.lower[j] + ftol) / -g
                } else {
                    if !self.upper[j].is_finite() {
                        continue;
                    }
                    (self.upper[j] - v + ftol) / g
                };
                if r < theta_max {
                    theta_max = r;
                }
            }
            let mut leave = NONBASIC;
            let mut theta = f64::INFINITY;
            let mut leave_bound = 0.0;
            if theta_max < f64::INFINITY {
                let mut best_alpha = 0.0;
                for i in 0..self.m {
                    let a = self.t[i * w + q];
                    if a.abs() <= self.opts.pivot_tol {
                        continue;
                    }
                    let j = self.head[i];
                    let g = -a * dir;
                    let v = self.x[j];
                    let (r, bound) = if g < 0.0 {
                        if !self.lower[j].is_finite() {
                            continue;
                        }
                        ((v - self.lower[j]).max(0.0) / -g, self.lower[j])
                    } else {
                        if !self.upper[j].is_finite() {
                            continue;
                        }
                        ((self.upper[j] - v).max(0.0) / g, self.upper[j])
                    };
                    if r <= theta_max {
                        let take = if bland {
                            leave == NONBASIC || r < theta - 1e-12
                                || ((r - theta).abs() <= 1e-12 && j < self.head[leave])
                        } else {
                            a.abs() > best_alpha
                        };
                        if take {
                            best_alpha = a.abs();
                            leave = i;
                            theta = r;
                            leave_bound = bound;
                        }
                    }
                }
            }
            if own_range <= theta {
                if own_range == f64::INFINITY {
                    return Outcome::Unbounded;
                }
                self.take_step(q, dir, own_range, NONBASIC, 0.0);
                degenerate_run = 0;
                continue;
            }
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.take_step(q, dir, theta, leave, leave_bound);
        }
    }

    /// Dual simplex from a dual feasible basis.
    pub(crate) fn dual(&mut self) -> Outcome {
        let w = self.w;
        self.infeasible_row = None;
        let mut stall = 0usize;
        let mut last_infeas = f64::INFINITY;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Outcome::IterationLimit;
            }
            let bland = stall >= self.opts.degenerate_limit;
            let mut r = NONBASIC;
            let mut worst = 0.0;
            let mut total = 0.0;
            for i in 0..self.m {
                let inf = self.infeasibility(self.head[i]);
                total += inf;
                if inf > 0.0 {
                    if bland {
                        if r == NONBASIC || self.head[i] < self.head[r] {
                            r = i;
                        }
                    } else if inf > worst {
                        worst = inf;
                        r = i;
                    }
                }
            }
            if r == NONBASIC {
                return Outcome::Done;
            }
            if total < last_infeas - 1e-12 {
                stall = 0;
            } else {
                stall += 1;
            }
            last_infeas = total;
            let p = self.head[r];
            let below = self.x[p] < self.lower[p];
            let target = if below { self.lower[p] } else { self.upper[p] };
            // x_p changes by -alpha_j * delta_j; we need it to increase when below
            let otol = self.opts.optimality_tol;
            let mut ratio_max = f64::INFINITY;
            for j in 0..self.ncols {
                if self.basic_row[j] != NONBASIC || self.is_fixed(j) {
                    continue;
                }
                let a = self.t[r * w + j];
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                if !self.dual_eligible(j, a, below) {
                    continue;
                }
                let rr = (self.d[j].abs() + otol) / a.abs();
                if rr < ratio_max {
                    ratio_max = rr;
                }
            }
            if ratio_max == f64::INFINITY {
                self.infeasible_row = Some(r);
                return Outcome::Infeasible;
            }
            let mut q = NONBASIC;
            let mut best_alpha = 0.0;
            for j in 0..self.ncols {
                if self.basic_row[j] != NONBASIC || self.is_fixed(j) {
                    continue;
                }
                let a = self.t[r * w + j];
                if a.abs() <= self.opts.pivot_tol || !self.dual_eligible(j, a, below) {
                    continue;
                }
                let rr = self.d[j].abs() / a.abs();
                if rr <= ratio_max {
                    let take = if bland { q == NONBASIC } else { a.abs() > best_alpha };
                    if take {
                        best_alpha = a.abs();
                        q = j;
                    }
                }
            }
            if q == NONBASIC {
                self.infeasible_row = Some(r);
                return Outcome::Infeasible;
            }
            let alpha = self.t[r * w + q];
            let delta = (self.x[p] - target) / alpha;
            for i in 0..self.m {
                let a = self.t[i * w + q];
                if a != 0.0 {
                    self.x[self.head[i]] -= a * delta;
                }
            }
            self.x[q] += delta;
            self.x[p] = target;
            self.pivot(r, q);
        }
    }

    fn dual_eligible(&self, j: usize, alpha: f64, below: bool) -> bool {
        let free = self.lower[j] == f64::NEG_INFINITY && self.upper[j] == f64::INFINITY;
        if free {
            return true;
        }
        let at_lower = self.x[j] <= self.lower[j];
        // moving up (delta > 0) changes x_p by -alpha*delta
        let up_helps = if below { alpha < 0.0 } else { alpha > 0.0 };
        if at_lower {
            up_helps
        } else {
            !up_helps
        }
    }

    /// Changes the bounds of structural `j`. Nonbasic variables are moved to
    /// the bound matching the sign of their reduced cost so dual feasibility
    /// is preserved.
    /// Bounds of structural variable `j`, in model units.
    pub(crate) fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        let (lower, upper) = (lower / self.col[j], upper / self.col[j]);
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.basic_row[j] == NONBASIC {
            let target = if lower == upper {
                lower
            } else if self.d[j] > 0.0 && lower.is_finite() {
                lower
            } else if self.d[j] < 0.0 && upper.is_finite() {
                upper
            } else {
                nearest_bound(lower, upper, self.x[j])
            };
            self.move_nonbasic(j, target);
        }
    }

    /// Re-optimizes after bound changes: dual simplex, then primal cleanup.
    pub(crate) fn reoptimize(&mut self) -> Outcome {
        self.infeasible_row = None;
        if self.dual_infeasible() {
            match self.phase_one() {
                Outcome::Done => return self.primal(),
                other => return other,
            }
        }
        match self.dual() {
            Outcome::Done => self.primal(),
            other => other,
        }
    }

    /// Checks the last dual infeasibility verdict against the original rows.
    /// The slack part of the offending tableau row is a row `y` of `B^-1`;
    /// the verdict stands if `y^T A x = y^T b` has no solution inside the
    /// bounds, with a margin that covers the feasibility tolerance.
    pub(crate) fn certify_infeasible(&self) -> bool {
        let Some(r) = self.infeasible_row else {
            return false;
        };
        let (m, n, w) = (self.m, self.n, self.w);
        let y = &self.t[r * w + n..r * w + n + m];
        let mut alpha = vec![0.0; self.ncols];
        let mut beta = 0.0;
        let mut ysum = 0.0;
        for i in 0..m {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            ysum += yi.abs();
            beta += yi * self.rhs[i];
            for &(j, a) in &self.rows[i] {
                alpha[j] += yi * a;
            }
            alpha[n + i] = yi;
        }
        // round-off leaves entries near 1e-16 on unbounded columns; they
        // would turn the box bound infinite
        let noise = 1e-12 * (1.0 + ysum);
        let (mut lo, mut hi) = (0.0, 0.0);
        for (j, &a) in alpha.iter().enumerate() {
            let unbounded = self.lower[j] == f64::NEG_INFINITY || self.upper[j] == f64::INFINITY;
            if unbounded && a.abs() <= noise {
                continue;
            }
            if a > 0.0 {
                lo += a * self.lower[j];
                hi += a * self.upper[j];
            } else if a < 0.0 {
                lo += a * self.upper[j];
                hi += a * self.lower[j];
            }
        }
        let margin = 10.0 * self.opts.feasibility_tol * (1.0 + ysum);
        (lo.is_finite() && lo > beta + margin) || (hi.is_finite() && hi < beta - margin)
    }

    /// Refactors the current basis and re-solves with the primal method.
    pub(crate) fn repair(&mut self) -> Outcome {
        self.refactor();
        match self.phase_one() {
            Outcome::Done => self.primal(),
            other => other,
        }
    }

    fn dual_infeasible(&self) -> bool {
        let tol = 1e-7;
        (0..self.ncols).any(|j| {
            if self.basic_row[j] != NONBASIC || self.is_fixed(j) {
                return false;
            }
            let dj = self.d[j];
            let free = self.lower[j] == f64::NEG_INFINITY && self.upper[j] == f64::INFINITY;
            if free {
                dj.abs() > tol
            } else if self.x[j] <= self.lower[j] {
                dj < -tol
            } else {
                dj > tol
            }
        })
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.x[..self.n].iter().zip(&self.col).map(|(x, c)| x * c).collect()
    }

    pub(crate) fn objective(&self) -> f64 {
        self.cost[..self.n]
            .iter()
            .zip(&self.x[..self.n])
            .map(|(c, x)| c * x)
            .sum()
    }

    pub(crate) fn result(&mut self, model: &SolverModel, outcome: Outcome) -> LpResult {
        let mut status = match outcome {
            Outcome::Done => LpStatus::Optimal,
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::IterationLimit => LpStatus::IterationLimit,
        };
        if status == LpStatus::Optimal {
            // clean numerical drift and verify
            self.refactor();
            let mut viol = model.max_violation(&self.structural_values());
            if viol > 1e-6 || self.dual_infeasible() {
                let again = match self.phase_one() {
                    Outcome::Done => self.primal(),
                    o => o,
                };
                if again == Outcome::Done {
                    self.refactor();
                }
                viol = model.max_violation(&self.structural_values());
            }
            let scale_ref = 1.0
                + model
                    .cons
                    .iter()
                    .fold(0.0f64, |acc, c| acc.max(c.rhs.abs()));
            if viol > 1e-6 * scale_ref {
                status = LpStatus::NumericalFailure;
            }
        }
        let duals = (0..self.m)
            .map(|i| -self.d[self.n + i] * self.scale[i])
            .collect();
        let x = self.structural_values();
        LpResult {
            status,
            objective: model.objective_offset + self.objective(),
            x,
            duals,
            reduced_costs: self.d[..self.n].iter().zip(&self.col).map(|(d, c)| d / c).collect(),
            iterations: self.iterations,
        }
    }
}

/// Powers of two from four rounds of alternating row and column
/// geometric-mean scaling.
fn column_scales(rows: &[Vec<(usize, f64)>], n: usize) -> Vec<f64> {
    let mut col = vec![1.0; n];
    let mut row = vec![1.0; rows.len()];
    for _ in 0..4 {
        for (i, r) in rows.iter().enumerate() {
            let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(j, a)| {
                let v = a.abs() * col[j];
                (lo.min(v), hi.max(v))
            });
            if hi > 0.0 {
                row[i] = 1.0 / (lo * hi).sqrt();
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in r {
                let v = a.abs() * row[i];
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        for j in 0..n {
            if hi[j] > 0.0 {
                col[j] = 1.0 / (lo[j] * hi[j]).sqrt();
            }
        }
    }
    col.iter().map(|c| c.log2().round().exp2()).collect()
}

fn initial_value(lower: f64, upper: f64) -> f64 {
    if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    }
}

fn nearest_bound(lower: f64, upper: f64, v: f64) -> f64 {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => {
            if (v - lower).abs() <= (upper - v).abs() {
                lower
            } else {
                upper
            }
        }
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}
