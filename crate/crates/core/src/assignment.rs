//! Strategy-based multimodal assignment for a fixed service design.
//!
//! For each destination `k` the problem is
//!
//! ```text
//! min  sum_a c_a v_a + sum_{i waiting} W_i
//! s.t. sum_{FS(i)} v - sum_{BS(i)} v = g_ik        (all i)
//!      v_a <= rate_a W_i                          (a constrained, tail i waiting)
//!      v >= 0, W >= 0
//! ```
//!
//! A link is constrained when its tail is a waiting node and it is a transit
//! link (rate = line frequency) or a road link (rate = zone matching rate).
//! Every other link behaves as an option of infinite frequency.
//!
//! Two interchangeable backends are provided: a label-setting hyperpath
//! algorithm, which also yields an optimal dual solution, and the explicit
//! LP solved by the kernel.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kernel::{solve_lp, LpOptions, LpStatus, Sense, SolverModel};
use crate::network::{link_cost, LinkKind, MultimodalNetwork};

/// Per-minute service rates of one design: a rate per line (0 when closed)
/// and the MoD rate `A_z V_z` per zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceRates {
    pub line: Vec<f64>,
    pub zone: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptionKind {
    Transit,
    Road,
}

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error("destination {destination}: origin {origin} cannot reach it")]
    Unreachable { origin: String, destination: String },
    #[error("destination {destination}: LP solver returned {status:?}")]
    Solver { destination: String, status: LpStatus },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Hyperpath,
    Lp,
}

/// A network together with link costs and the rates of one design.
#[derive(Debug, Clone)]
pub struct AssignmentProblem<'a> {
    pub net: &'a MultimodalNetwork,
    /// Generalized cost per link, minutes.
    pub cost: Vec<f64>,
    /// Rate of every link; `f64::INFINITY` for unconstrained links.
    pub rate: Vec<f64>,
    pub destinations: Vec<usize>,
}

/// The kind of waiting option a link represents, if it is constrained.
pub fn option_kind(net: &MultimodalNetwork, a: usize) -> Option<OptionKind> {
    let link = &net.links[a];
    if !net.is_waiting(link.tail) {
        return None;
    }
    match link.kind {
        LinkKind::Transit => Some(OptionKind::Transit),
        LinkKind::Road => Some(OptionKind::Road),
        _ => None,
    }
}

pub fn link_costs(net: &MultimodalNetwork, value_of_time: f64) -> Vec<f64> {
    net.links.iter().map(|l| link_cost(l, value_of_time)).collect()
}

impl<'a> AssignmentProblem<'a> {
    pub fn new(net: &'a MultimodalNetwork, rates: &ServiceRates, value_of_time: f64) -> Self {
        Self::with_costs(net, rates, link_costs(net, value_of_time))
    }

    pub fn with_costs(net: &'a MultimodalNetwork, rates: &ServiceRates, cost: Vec<f64>) -> Self {
        let rate = (0..net.num_links())
            .map(|a| match option_kind(net, a) {
                Some(OptionKind::Transit) => rates.line[net.links[a].line.unwrap()],
                Some(OptionKind::Road) => rates.zone[net.nodes[net.links[a].tail].zone],
                None => f64::INFINITY,
            })
            .collect();
        AssignmentProblem {
            net,
            cost,
            rate,
            destinations: net.destinations(),
        }
    }
}

/// Optimal primal and dual solution for one destination.
#[derive(Debug, Clone, Serialize)]
pub struct DestinationSolution {
    pub destination: usize,
    pub objective: f64,
    pub flows: Vec<f64>,
    /// Waiting stock per node (zero at non-waiting nodes).
    pub waits: Vec<f64>,
    /// Conservation duals; the expected cost to reach the destination.
    pub labels: Vec<f64>,
    /// Duals of the proportion rows, one per link (zero when unconstrained).
    pub link_duals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ObjectiveSplit {
    /// Generalized cost on transit and road links.
    pub in_vehicle: f64,
    /// Generalized cost on walking links (including boarding fares).
    pub walk: f64,
    pub transit_wait: f64,
    pub road_wait: f64,
}

impl ObjectiveSplit {
    pub fn total(&self) -> f64 {
        self.in_vehicle + self.walk + self.transit_wait + self.road_wait
    }

    fn add(&mut self, o: &ObjectiveSplit) {
        self.in_vehicle += o.in_vehicle;
        self.walk += o.walk;
        self.transit_wait += o.transit_wait;
        self.road_wait += o.road_wait;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssignmentSolution {
    pub objective: f64,
    pub split: ObjectiveSplit,
    pub per_destination: Vec<DestinationSolution>,
}

impl AssignmentSolution {
    /// Total flow per link over all destinations.
    pub fn link_totals(&self) -> Vec<f64> {
        let n = self.per_destination.first().map_or(0, |d| d.flows.len());
        let mut t = vec![0.0; n];
        for d in &self.per_destination {
            for (x, v) in t.iter_mut().zip(&d.flows) {
                *x += v;
            }
        }
        t
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on the value, then on the index
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of the label-setting pass for one destination.
struct Labels {
    u: Vec<f64>,
    freq: Vec<f64>,
    attractive: Vec<Vec<usize>>,
    order: Vec<usize>,
}

fn hyperpath_labels(p: &AssignmentProblem, k: usize) -> Labels {
    let net = p.net;
    let n = net.num_nodes();
    let mut u = vec![f64::INFINITY; n];
    let mut freq = vec![0.0f64; n];
    let mut num = vec![1.0f64; n];
    let mut attractive: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nodes = BinaryHeap::new();
    let mut links = BinaryHeap::new();
    u[k] = 0.0;
    nodes.push(Key(0.0, k));
    loop {
        while let Some(&Key(val, i)) = nodes.peek() {
            if settled[i] || val != u[i] {
                nodes.pop();
            } else {
                break;
            }
        }
        let settle = match (nodes.peek(), links.peek()) {
            (Some(Key(nv, _)), Some(Key(lv, _))) => nv <= lv,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if settle {
            let Key(_, j) = nodes.pop().unwrap();
            settled[j] = true;
            order.push(j);
            for &a in net.backward_star(j) {
                if p.rate[a] > 0.0 && !settled[net.links[a].tail] {
                    links.push(Key(u[j] + p.cost[a], a));
                }
            }
        } else {
            let Key(c, a) = links.pop().unwrap();
            let i = net.links[a].tail;
            if settled[i] {
                continue;
            }
            let tol = 1e-12 * (1.0 + c.abs());
            if !(c < u[i] - tol) {
                continue;
            }
            let f = p.rate[a];
            if f == f64::INFINITY {
                u[i] = c;
                freq[i] = f64::INFINITY;
                attractive[i].clear();
                attractive[i].push(a);
            } else {
                num[i] += f * c;
                freq[i] += f;
                u[i] = num[i] / freq[i];
                attractive[i].push(a);
            }
            nodes.push(Key(u[i], i));
        }
    }
    Labels {
        u,
        freq,
        attractive,
        order,
    }
}

/// Solves one destination with the label-setting hyperpath algorithm.
pub fn solve_destination_hyperpath(
    p: &AssignmentProblem,
    k: usize,
) -> Result<DestinationSolution, AssignmentError> {
    let net = p.net;
    let n = net.num_nodes();
    let g = net.demand_vector(k);
    let lab = hyperpath_labels(p, k);
    for (i, &gi) in g.iter().enumerate() {
        if gi > 0.0 && lab.u[i] == f64::INFINITY {
            return Err(AssignmentError::Unreachable {
                origin: net.nodes[i].id.clone(),
                destination: net.nodes[k].id.clone(),
            });
        }
    }
    let mut vol: Vec<f64> = g.iter().map(|&x| x.max(0.0)).collect();
    let mut flows = vec![0.0; net.num_links()];
    let mut waits = vec![0.0; n];
    for &i in lab.order.iter().rev() {
        if i == k || vol[i] <= 0.0 {
            continue;
        }
        let v = vol[i];
        if lab.freq[i] == f64::INFINITY {
            let a = lab.attractive[i][0];
            flows[a] += v;
            vol[net.links[a].head] += v;
        } else {
            let w = v / lab.freq[i];
            waits[i] = w;
            for &a in &lab.attractive[i] {
                let x = p.rate[a] * w;
                flows[a] += x;
                vol[net.links[a].head] += x;
            }
        }
    }
    let finite_max = lab
        .u
        .iter()
        .filter(|x| x.is_finite())
        .fold(0.0f64, |m, &x| m.max(x));
    let big = finite_max + 1.0;
    let labels: Vec<f64> = lab
        .u
        .iter()
        .map(|&x| if x.is_finite() { x } else { big })
        .collect();
    let link_duals = proportion_duals(p, &labels);
    let objective = flows
        .iter()
        .zip(&p.cost)
        .map(|(v, c)| v * c)
        .sum::<f64>()
        + waits.iter().sum::<f64>();
    Ok(DestinationSolution {
        destination: k,
        objective,
        flows,
        waits,
        labels,
        link_duals,
    })
}

/// `pi_a = min(0, c_a + mu_head - mu_tail)` on constrained links.
pub fn proportion_duals(p: &AssignmentProblem, labels: &[f64]) -> Vec<f64> {
    (0..p.net.num_links())
        .map(|a| {
            if p.rate[a] == f64::INFINITY {
                0.0
            } else {
                let l = &p.net.links[a];
                (p.cost[a] + labels[l.head] - labels[l.tail]).min(0.0)
            }
        })
        .collect()
}

/// Column layout of the per-destination assignment LP.
#[derive(Debug, Clone)]
pub struct AssignmentLpLayout {
    pub flow_var: Vec<usize>,
    /// Variable index of `W[i,k]` per node (`usize::MAX` for non-waiting nodes).
    pub wait_var: Vec<usize>,
    /// Row index of the conservation row per node.
    pub conservation_row: Vec<usize>,
    /// Row index of the proportion row per link (`usize::MAX` if unconstrained).
    pub proportion_row: Vec<usize>,
}

/// Adds the assignment rows and columns for destination `k` to `m`.
pub fn append_assignment_lp(
    m: &mut SolverModel,
    p: &AssignmentProblem,
    k: usize,
) -> AssignmentLpLayout {
    let net = p.net;
    let kid = &net.nodes[k].id;
    let flow_var: Vec<usize> = (0..net.num_links())
        .map(|a| m.add_var(format!("v[{},{}]", a, kid), 0.0, f64::INFINITY, p.cost[a]))
        .collect();
    let wait_var: Vec<usize> = (0..net.num_nodes())
        .map(|i| {
            if net.is_waiting(i) {
                m.add_var(format!("W[{},{}]", net.nodes[i].id, kid), 0.0, f64::INFINITY, 1.0)
            } else {
                usize::MAX
            }
        })
        .collect();
    let g = net.demand_vector(k);
    let conservation_row = (0..net.num_nodes())
        .map(|i| {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for &a in net.forward_star(i) {
                coeffs.push((flow_var[a], 1.0));
            }
            for &a in net.backward_star(i) {
                coeffs.push((flow_var[a], -1.0));
            }
            m.add_con(format!("flow[{},{}]", net.nodes[i].id, kid), coeffs, Sense::Eq, g[i])
        })
        .collect();
    let proportion_row = (0..net.num_links())
        .map(|a| {
            if p.rate[a] == f64::INFINITY {
                return usize::MAX;
            }
            let i = net.links[a].tail;
            let mut coeffs = vec![(flow_var[a], 1.0)];
            if p.rate[a] != 0.0 {
                coeffs.push((wait_var[i], -p.rate[a]));
            }
            m.add_con(format!("prop[{},{}]", a, kid), coeffs, Sense::Le, 0.0)
        })
        .collect();
    AssignmentLpLayout {
        flow_var,
        wait_var,
        conservation_row,
        proportion_row,
    }
}

/// The full assignment LP over all destinations, as one model.
pub fn build_assignment_lp(p: &AssignmentProblem) -> SolverModel {
    let mut m = SolverModel::new("assignment");
    for &k in &p.destinations {
        append_assignment_lp(&mut m, p, k);
    }
    m
}

/// Solves one destination through the explicit LP.
pub fn solve_destination_lp(
    p: &AssignmentProblem,
    k: usize,
    opts: &LpOptions,
) -> Result<DestinationSolution, AssignmentError> {
    let net = p.net;
    let mut m = SolverModel::new(format!("assign-{}", net.nodes[k].id));
    let lay = append_assignment_lp(&mut m, p, k);
    let r = solve_lp(&m, opts);
    if r.status != LpStatus::Optimal {
        if r.status == LpStatus::Infeasible {
            let g = net.demand_vector(k);
            let reach = net.reverse_reachable(k, |_| true);
            if let Some(o) = (0..net.num_nodes()).find(|&i| g[i] > 0.0 && !reach[i]) {
                return Err(AssignmentError::Unreachable {
                    origin: net.nodes[o].id.clone(),
                    destination: net.nodes[k].id.clone(),
                });
            }
        }
        return Err(AssignmentError::Solver {
            destination: net.nodes[k].id.clone(),
            status: r.status,
        });
    }
    let flows: Vec<f64> = lay.flow_var.iter().map(|&j| r.x[j].max(0.0)).collect();
    let waits: Vec<f64> = lay
        .wait_var
        .iter()
        .map(|&j| if j == usize::MAX { 0.0 } else { r.x[j].max(0.0) })
        .collect();
    let labels: Vec<f64> = lay.conservation_row.iter().map(|&i| r.duals[i]).collect();
    let link_duals: Vec<f64> = lay
        .proportion_row
        .iter()
        .map(|&i| if i == usize::MAX { 0.0 } else { r.duals[i].min(0.0) })
        .collect();
    Ok(DestinationSolution {
        destination: k,
        objective: r.objective,
        flows,
        waits,
        labels,
        link_duals,
    })
}

pub fn solve_destination(
    p: &AssignmentProblem,
    k: usize,
    backend: Backend,
) -> Result<DestinationSolution, AssignmentError> {
    match backend {
        Backend::Hyperpath => solve_destination_hyperpath(p, k),
        Backend::Lp => solve_destination_lp(p, k, &LpOptions::default()),
    }
}

/// Objective split of one destination solution.
pub fn split_objective(p: &AssignmentProblem, d: &DestinationSolution) -> ObjectiveSplit {
    let net = p.net;
    let mut s = ObjectiveSplit::default();
    for (a, &v) in d.flows.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        match net.links[a].kind {
            LinkKind::Transit | LinkKind::Road => s.in_vehicle += p.cost[a] * v,
            _ => s.walk += p.cost[a] * v,
        }
    }
    for i in 0..net.num_nodes() {
        let w = d.waits[i];
        if w <= 0.0 {
            continue;
        }
        let (mut transit, mut road) = (0.0, 0.0);
        for &a in net.forward_star(i) {
            match option_kind(net, a) {
                Some(OptionKind::Transit) => transit += d.flows[a],
                Some(OptionKind::Road) => road += d.flows[a],
                None => {}
            }
        }
        let tot = transit + road;
        if tot > 0.0 {
            s.transit_wait += w * transit / tot;
            s.road_wait += w * road / tot;
        } else {
            // idle waiting stock: attribute by available options
            let has_road = net
                .forward_star(i)
                .iter()
                .any(|&a| option_kind(net, a) == Some(OptionKind::Road));
            if has_road {
                s.road_wait += w;
            } else {
                s.transit_wait += w;
            }
        }
    }
    s
}

/// Solves all destinations (in parallel) and sums the results.
pub fn solve_assignment(
    p: &AssignmentProblem,
    backend: Backend,
) -> Result<AssignmentSolution, AssignmentError> {
    let per: Vec<DestinationSolution> = p
        .destinations
        .par_iter()
        .map(|&k| solve_destination(p, k, backend))
        .collect::<Result<_, _>>()?;
    Ok(assemble(p, per))
}

pub fn assemble(p: &AssignmentProblem, per: Vec<DestinationSolution>) -> AssignmentSolution {
    let mut split = ObjectiveSplit::default();
    let mut objective = 0.0;
    for d in &per {
        split.add(&split_objective(p, d));
        objective += d.objective;
    }
    AssignmentSolution {
        objective,
        split,
        per_destination: per,
    }
}

/// Per-(destination, node) upper bounds on the waiting stock.
#[derive(Debug, Clone, Serialize)]
pub struct WaitBounds {
    pub destinations: Vec<usize>,
    /// `bounds[d][i]` for destination `destinations[d]` and node `i`.
    pub bounds: Vec<Vec<f64>>,
}

impl WaitBounds {
    pub fn get(&self, dest_index: usize, node: usize) -> f64 {
        self.bounds[dest_index][node]
    }

    pub fn scaled(&self, factor: f64) -> WaitBounds {
        WaitBounds {
            destinations: self.destinations.clone(),
            bounds: self
                .bounds
                .iter()
                .map(|row| row.iter().map(|x| x * factor).collect())
                .collect(),
        }
    }
}

/// Bounds on `W_ik` valid for every design whose rates dominate `worst`
/// link by link.
///
/// `min_option_rate[a]` is the smallest positive rate constrained link `a`
/// can have under any design. Three bounds are combined, then multiplied
/// by `safety`:
/// the destination objective at the worst design (it dominates every term),
/// total demand to `k` over the smallest option rate at `i`, and total
/// demand times the node label at the worst design.
pub fn estimate_wait_upper_bounds(
    worst: &AssignmentProblem,
    min_option_rate: &[f64],
    safety: f64,
) -> Result<WaitBounds, AssignmentError> {
    let net = worst.net;
    let per: Vec<DestinationSolution> = worst
        .destinations
        .par_iter()
        .map(|&k| solve_destination_hyperpath(worst, k))
        .collect::<Result<_, _>>()?;
    let mut r_min = vec![f64::INFINITY; net.num_nodes()];
    for a in 0..net.num_links() {
        if worst.rate[a].is_finite() && min_option_rate[a] > 0.0 {
            let i = net.links[a].tail;
            r_min[i] = r_min[i].min(min_option_rate[a]);
        }
    }
    let bounds = per
        .par_iter()
        .map(|d| {
            let k = d.destination;
            let u = hyperpath_labels(worst, k).u;
            let demand_k: f64 = -net.demand_vector(k)[k];
            (0..net.num_nodes())
                .map(|i| {
                    if !net.is_waiting(i) || r_min[i] == f64::INFINITY || demand_k <= 0.0 {
                        return 0.0;
                    }
                    let b = d.objective.min(demand_k / r_min[i]).min(demand_k * u[i]);
                    b * safety
                })
                .collect()
        })
        .collect();
    Ok(WaitBounds {
        destinations: worst.destinations.clone(),
        bounds,
    })
}

/// Shares of served demand by the modes used along the way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ModeShares {
    /// Percent of served trips using the road (MoD) layer only.
    pub road: f64,
    pub transit: f64,
    /// Both road and transit.
    pub multimodal: f64,
    /// Walking only.
    pub walk_only: f64,
    pub served_trips: f64,
}

const ROAD_BIT: u8 = 1;
const TRANSIT_BIT: u8 = 2;

/// Classifies served trips by propagating mode masks proportionally along
/// each destination's flow, after cancelling any flow cycles.
pub fn mode_shares(net: &MultimodalNetwork, sol: &AssignmentSolution) -> ModeShares {
    let mut by_mask = [0.0f64; 4];
    for d in &sol.per_destination {
        let k = d.destination;
        let mut flows = d.flows.clone();
        cancel_cycles(net, &mut flows);
        let order = match topological_order(net, &flows) {
            Some(o) => o,
            None => continue,
        };
        let g = net.demand_vector(k);
        let mut mix: Vec<[f64; 4]> = vec![[0.0; 4]; net.num_nodes()];
        for (i, &gi) in g.iter().enumerate() {
            if gi > 0.0 && i != k {
                mix[i][0] += gi;
            }
        }
        for &i in &order {
            if i == k {
                continue;
            }
            let total: f64 = mix[i].iter().sum();
            let out: f64 = net.forward_star(i).iter().map(|&a| flows[a]).sum();
            if total <= 0.0 || out <= 0.0 {
                continue;
            }
            let m = mix[i];
            for &a in net.forward_star(i) {
                let v = flows[a];
                if v <= 0.0 {
                    continue;
                }
                let bit = match net.links[a].kind {
                    LinkKind::Road => ROAD_BIT,
                    LinkKind::Transit => TRANSIT_BIT,
                    _ => 0,
                };
                let j = net.links[a].head;
                for (mask, &amount) in m.iter().enumerate() {
                    if amount > 0.0 {
                        mix[j][mask | bit as usize] += amount * v / out;
                    }
                }
            }
        }
        for (mask, amount) in mix[k].iter().enumerate() {
            by_mask[mask] += amount;
        }
    }
    let served: f64 = by_mask.iter().sum();
    if served <= 0.0 {
        return ModeShares::default();
    }
    let pct = |x: f64| 100.0 * x / served;
    ModeShares {
        road: pct(by_mask[ROAD_BIT as usize]),
        transit: pct(by_mask[TRANSIT_BIT as usize]),
        multimodal: pct(by_mask[(ROAD_BIT | TRANSIT_BIT) as usize]),
        walk_only: pct(by_mask[0]),
        served_trips: served,
    }
}

fn topological_order(net: &MultimodalNetwork, flows: &[f64]) -> Option<Vec<usize>> {
    let n = net.num_nodes();
    let mut indeg = vec![0usize; n];
    for (a, &v) in flows.iter().enumerate() {
        if v > 0.0 {
            indeg[net.links[a].head] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = stack.pop() {
        order.push(i);
        for &a in net.forward_star(i) {
            if flows[a] > 0.0 {
                let j = net.links[a].head;
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    stack.push(j);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Removes directed cycles from a flow by subtracting the bottleneck.
fn cancel_cycles(net: &MultimodalNetwork, flows: &mut [f64]) {
    let n = net.num_nodes();
    loop {
        // iterative DFS looking for a back edge
        let mut state = vec![0u8; n];
        let mut parent_link = vec![usize::MAX; n];
        let mut found: Option<(usize, usize)> = None;
        'outer: for s in 0..n {
            if state[s] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(s, 0)];
            state[s] = 1;
            while let Some(&mut (i, ref mut pos)) = stack.last_mut() {
                let fs = net.forward_star(i);
                if *pos < fs.len() {
                    let a = fs[*pos];
                    *pos += 1;
                    if flows[a] <= 0.0 {
                        continue;
                    }
                    let j = net.links[a].head;
                    if state[j] == 1 {
                        found = Some((a, j));
                        break 'outer;
                    }
                    if state[j] == 0 {
                        state[j] = 1;
                        parent_link[j] = a;
                        stack.push((j, 0));
                    }
                } else {
                    state[i] = 2;
                    stack.pop();
                }
            }
        }
        let Some((closing, start)) = found else {
            return;
        };
        let mut cycle = vec![closing];
        let mut cur = net.links[closing].tail;
        while cur != start {
            let a = parent_link[cur];
            cycle.push(a);
            cur = net.links[a].tail;
        }
        let m = cycle.iter().map(|&a| flows[a]).fold(f64::INFINITY, f64::min);
        for &a in &cycle {
            flows[a] -= m;
            if flows[a] < 1e-12 {
                flows[a] = 0.0;
            }
        }
    }
}

/// Flow conservation residual `max |FS - BS - g|` for one destination.
pub fn conservation_residual(net: &MultimodalNetwork, d: &DestinationSolution) -> f64 {
    let g = net.demand_vector(d.destination);
    (0..net.num_nodes())
        .map(|i| {
            let out: f64 = net.forward_star(i).iter().map(|&a| d.flows[a]).sum();
            let inn: f64 = net.backward_star(i).iter().map(|&a| d.flows[a]).sum();
            (out - inn - g[i]).abs() / (1.0 + g[i].abs())
        })
        .fold(0.0, f64::max)
}

/// Largest violation of `v_a <= rate_a W_i` over constrained links.
pub fn proportion_residual(p: &AssignmentProblem, d: &DestinationSolution) -> f64 {
    (0..p.net.num_links())
        .filter(|&a| p.rate[a].is_finite())
        .map(|a| {
            let i = p.net.links[a].tail;
            (d.flows[a] - p.rate[a] * d.waits[i]).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Checks the dual solution of one destination: conservation duals and
/// proportion duals must satisfy the dual constraints of the assignment LP,
/// and the dual objective must equal the primal objective.
pub fn dual_residual(p: &AssignmentProblem, d: &DestinationSolution) -> (f64, f64) {
    let net = p.net;
    let mut worst = 0.0f64;
    let mut wait_dual: HashMap<usize, f64> = HashMap::new();
    for a in 0..net.num_links() {
        let l = &net.links[a];
        let lhs = d.labels[l.tail] - d.labels[l.head] + d.link_duals[a];
        worst = worst.max(lhs - p.cost[a]);
        if p.rate[a].is_finite() {
            worst = worst.max(d.link_duals[a]);
            *wait_dual.entry(l.tail).or_default() += -p.rate[a] * d.link_duals[a];
        }
    }
    for (_, s) in wait_dual {
        worst = worst.max(s - 1.0);
    }
    let g = net.demand_vector(d.destination);
    let dual_obj: f64 = g.iter().zip(&d.labels).map(|(g, u)| g * u).sum();
    (worst, (dual_obj - d.objective).abs())
}
