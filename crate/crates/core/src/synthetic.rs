//! Generated test instances: the two-zone illustrative network, small grid
//! toys that can be solved by enumeration, a mid-size grid and a network on
//! the Sioux Falls road graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::{DesignConfig, DesignDecision, SENTINEL_FLEET};
use crate::network::{LinkKind, MultimodalNetwork, NetworkBuilder, NodeKind};

/// A network ready for assignment (walking links and fares applied) with
/// its design configuration.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub net: MultimodalNetwork,
    pub config: DesignConfig,
}

/// Two zones, three lines (red, green, blue). Stop 1 is also the MoD
/// pick-up point of zone Z1, so the traveller waiting there chooses among
/// red, green and MoD.
pub fn fig1() -> Instance {
    let mut b = NetworkBuilder::new();
    let z1 = b.add_node("Z1", NodeKind::Centroid, "Z1", 0.0, 0.0);
    let s1 = b.add_node("1", NodeKind::TransitStop, "Z1", 0.2, 0.0);
    let r1 = b.add_node("R1", NodeKind::RoadIntersection, "Z1", 0.0, 0.3);
    let r4 = b.add_node("R4", NodeKind::RoadIntersection, "Z1", 0.0, -0.3);
    let s2 = b.add_node("2", NodeKind::TransitStop, "Z2", 2.0, 0.5);
    let s4 = b.add_node("4", NodeKind::TransitStop, "Z2", 2.0, -0.5);
    let s8 = b.add_node("8", NodeKind::TransitStop, "Z2", 4.0, 0.5);
    let s9 = b.add_node("9", NodeKind::TransitStop, "Z2", 4.0, -0.5);
    let r2 = b.add_node("R2", NodeKind::RoadIntersection, "Z2", 2.0, 1.0);
    let r3 = b.add_node("R3", NodeKind::RoadIntersection, "Z2", 4.0, 1.0);
    let r5 = b.add_node("R5", NodeKind::RoadIntersection, "Z2", 2.0, -1.0);
    let r6 = b.add_node("R6", NodeKind::RoadIntersection, "Z2", 4.0, -1.0);
    let z2 = b.add_node("Z2", NodeKind::Centroid, "Z2", 4.5, 0.0);
    for (h, t) in [(s1, 1.0), (r1, 1.0), (r4, 1.0)] {
        b.add_link(z1, h, LinkKind::AccessWalk, t, 0.0);
    }
    b.add_line("red", &[s1, s2, s8], &[5.0, 5.0], true);
    b.add_line("green", &[s1, s4, s9], &[5.0, 5.0], true);
    b.add_line("blue", &[s2, s8], &[5.0], true);
    for (t, h, m) in [(s1, r2, 5.0), (r1, r2, 3.0), (r2, r3, 7.0), (r4, r5, 3.0), (r5, r6, 5.0)] {
        b.add_link(t, h, LinkKind::Road, m, 0.0);
    }
    b.add_link(r2, s2, LinkKind::ModeTransfer, 1.0, 0.0);
    b.add_link(r5, s4, LinkKind::ModeTransfer, 1.0, 0.0);
    for t in [r3, r6, s8, s9] {
        b.add_link(t, z2, LinkKind::EgressWalk, 2.0, 0.0);
    }
    b.add_demand(z1, z2, 100.0);
    let net = b.build().expect("fixture is valid");
    let config = DesignConfig {
        frequencies: vec![10.0, 20.0, 30.0],
        fleet_sizes: vec![0.01, 50.0, 100.0],
        bus_budget: 20.0,
        fleet_budget: 150.0,
        transit_fare: 0.0,
        mod_base_fare: 0.0,
        mod_fare_per_min: 0.0,
        ..DesignConfig::default()
    };
    Instance {
        name: "fig1".into(),
        net,
        config,
    }
}

/// Red 10/hr, green 30/hr, blue 20/hr, 100 vehicles in Z1 and 50 in Z2.
pub fn fig1_design() -> DesignDecision {
    DesignDecision {
        line_freq: vec![Some(0), Some(2), Some(1)],
        zone_fleet: vec![2, 1],
    }
}

/// A line given by the grid intersections its stops sit next to. Lines run
/// out and back over the same stops.
#[derive(Debug, Clone)]
pub struct LineSpec {
    pub id: String,
    pub path: Vec<(usize, usize)>,
    pub candidate: bool,
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Miles between neighbouring intersections.
    pub spacing: f64,
    pub zone_rows: usize,
    pub zone_cols: usize,
    pub lines: Vec<LineSpec>,
    pub road_mph: f64,
    pub bus_mph: f64,
    /// Trips per OD pair are drawn uniformly from this range, then damped
    /// with distance.
    pub trips: (f64, f64),
    pub seed: u64,
    pub config: DesignConfig,
}

/// Stops at every `every`-th intersection of row `r`.
pub fn row_line(id: &str, r: usize, cols: usize, every: usize) -> LineSpec {
    LineSpec {
        id: id.into(),
        path: (0..cols).step_by(every).map(|c| (r, c)).collect(),
        candidate: true,
    }
}

pub fn col_line(id: &str, c: usize, rows: usize, every: usize) -> LineSpec {
    LineSpec {
        id: id.into(),
        path: (0..rows).step_by(every).map(|r| (r, c)).collect(),
        candidate: true,
    }
}

pub fn grid_instance(spec: &GridSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = NetworkBuilder::new();
    let s = spec.spacing;
    let zone_of = |r: usize, c: usize| -> String {
        let zr = r * spec.zone_rows / spec.rows;
        let zc = c * spec.zone_cols / spec.cols;
        format!("z{}", zr * spec.zone_cols + zc)
    };
    let mut road = vec![vec![0usize; spec.cols]; spec.rows];
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            road[r][c] = b.add_node(
                &format!("r{}_{}", r, c),
                NodeKind::RoadIntersection,
                &zone_of(r, c),
                c as f64 * s,
                r as f64 * s,
            );
        }
    }
    let road_min = s / spec.road_mph * 60.0;
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if c + 1 < spec.cols {
                b.add_link(road[r][c], road[r][c + 1], LinkKind::Road, road_min, 0.0);
                b.add_link(road[r][c + 1], road[r][c], LinkKind::Road, road_min, 0.0);
            }
            if r + 1 < spec.rows {
                b.add_link(road[r][c], road[r + 1][c], LinkKind::Road, road_min, 0.0);
                b.add_link(road[r + 1][c], road[r][c], LinkKind::Road, road_min, 0.0);
            }
        }
    }
    let mut centroids = Vec::new();
    for zr in 0..spec.zone_rows {
        for zc in 0..spec.zone_cols {
            // anchor at the intersection nearest the block centre
            let r0 = (zr * spec.rows).div_ceil(spec.zone_rows);
            let r1 = ((zr + 1) * spec.rows).div_ceil(spec.zone_rows);
            let c0 = (zc * spec.cols).div_ceil(spec.zone_cols);
            let c1 = ((zc + 1) * spec.cols).div_ceil(spec.zone_cols);
            let (ar, ac) = ((r0 + r1 - 1) / 2, (c0 + c1 - 1) / 2);
            let id = format!("z{}", zr * spec.zone_cols + zc);
            let k = b.add_node(
                &format!("c{}", zr * spec.zone_cols + zc),
                NodeKind::Centroid,
                &id,
                ac as f64 * s + 0.12,
                ar as f64 * s + 0.09,
            );
            centroids.push(k);
        }
    }
    let bus_min_per_mile = 60.0 / spec.bus_mph;
    for (li, line) in spec.lines.iter().enumerate() {
        let dx = 0.03 + 0.02 * (li % 4) as f64;
        let stops: Vec<usize> = line
            .path
            .iter()
            .map(|&(r, c)| {
                b.add_node(
                    &format!("s{}_{}_{}", line.id, r, c),
                    NodeKind::TransitStop,
                    &zone_of(r, c),
                    c as f64 * s + dx,
                    r as f64 * s - 0.04,
                )
            })
            .collect();
        let hop = |a: (usize, usize), z: (usize, usize)| {
            (a.0.abs_diff(z.0) + a.1.abs_diff(z.1)) as f64 * s * bus_min_per_mile
        };
        let mut seq = stops.clone();
        seq.extend(stops.iter().rev().skip(1));
        let mut path = line.path.clone();
        path.extend(line.path.iter().rev().skip(1));
        let times: Vec<f64> = path.windows(2).map(|w| hop(w[0], w[1])).collect();
        b.add_line(&line.id, &seq, &times, line.candidate);
    }
    for (i, &o) in centroids.iter().enumerate() {
        for (j, &d) in centroids.iter().enumerate() {
            if i == j {
                continue;
            }
            let (po, pd) = (&b.nodes[o], &b.nodes[d]);
            let dist = ((po.x - pd.x).powi(2) + (po.y - pd.y).powi(2)).sqrt();
            let base = rng.gen_range(spec.trips.0..=spec.trips.1);
            let trips = (base * (-dist / 8.0).exp()).round().max(1.0);
            b.add_demand(o, d, trips);
        }
    }
    let net = b
        .build()
        .expect("grid instance is valid")
        .build_walking_links(spec.config.walk_distance, spec.config.walk_speed_mph, None)
        .with_fares(&spec.config.fares());
    Instance {
        name: spec.name.clone(),
        net,
        config: spec.config.clone(),
    }
}

fn toy_config(frequencies: Vec<f64>, fleets: Vec<f64>, buses: f64, vehicles: f64) -> DesignConfig {
    DesignConfig {
        frequencies,
        fleet_sizes: fleets,
        bus_budget: buses,
        fleet_budget: vehicles,
        ..DesignConfig::default()
    }
}

/// Three instances with at most 4 zones, 3 lines, 3 frequencies and 3
/// fleet sizes, small enough to enumerate every design.
pub fn toy_instances() -> Vec<Instance> {
    let a = GridSpec {
        name: "toy-a".into(),
        rows: 3,
        cols: 3,
        spacing: 1.0,
        zone_rows: 2,
        zone_cols: 2,
        lines: vec![row_line("A1", 0, 3, 1), col_line("A2", 2, 3, 1), row_line("A3", 2, 3, 1)],
        road_mph: 20.0,
        bus_mph: 15.0,
        trips: (20.0, 60.0),
        seed: 11,
        config: toy_config(vec![3.0, 12.0], vec![0.01, 100.0], 14.0, 200.0),
    };
    let b = GridSpec {
        name: "toy-b".into(),
        rows: 2,
        cols: 4,
        spacing: 1.0,
        zone_rows: 1,
        zone_cols: 3,
        lines: vec![row_line("B1", 0, 4, 1), row_line("B2", 1, 4, 1)],
        road_mph: 18.0,
        bus_mph: 15.0,
        trips: (30.0, 80.0),
        seed: 23,
        config: toy_config(vec![4.0, 8.0, 12.0], vec![0.01, 60.0, 120.0], 20.0, 200.0),
    };
    let c = GridSpec {
        name: "toy-c".into(),
        rows: 4,
        cols: 4,
        spacing: 0.8,
        zone_rows: 2,
        zone_cols: 2,
        lines: vec![
            row_line("C1", 1, 4, 1),
            col_line("C2", 1, 4, 1),
            LineSpec {
                id: "C3".into(),
                path: vec![(0, 0), (1, 1), (2, 2), (3, 3)],
                candidate: true,
            },
        ],
        road_mph: 20.0,
        bus_mph: 14.0,
        trips: (10.0, 50.0),
        seed: 37,
        config: toy_config(vec![4.0, 12.0], vec![0.01, 100.0, 300.0], 24.0, 500.0),
    };
    vec![grid_instance(&a), grid_instance(&b), grid_instance(&c)]
}

/// 24 zones, 12 candidate lines, about 500 nodes.
pub fn midsize_spec() -> GridSpec {
    let mut lines = Vec::new();
    for (i, r) in [1usize, 4, 7, 10, 13, 16].iter().enumerate() {
        lines.push(row_line(&format!("H{}", i + 1), *r, 19, 2));
    }
    for (i, c) in [1usize, 4, 7, 10, 13, 16].iter().enumerate() {
        lines.push(col_line(&format!("V{}", i + 1), *c, 19, 2));
    }
    GridSpec {
        name: "midsize".into(),
        rows: 19,
        cols: 19,
        spacing: 0.5,
        zone_rows: 6,
        zone_cols: 4,
        lines,
        road_mph: 20.0,
        bus_mph: 15.0,
        trips: (5.0, 40.0),
        seed: 2024,
        // one frequency and one real fleet size keep the master small
        // enough to solve to optimality in seconds
        config: DesignConfig {
            frequencies: vec![6.0],
            fleet_sizes: vec![SENTINEL_FLEET, 300.0],
            bus_budget: 32.0,
            fleet_budget: 300.0,
            ..DesignConfig::default()
        },
    }
}

pub fn midsize() -> Instance {
    grid_instance(&midsize_spec())
}

/// The 24-node, 76-link Sioux Falls road graph: coordinates in miles and
/// free-flow minutes per undirected edge.
pub const SIOUX_FALLS_NODES: [(f64, f64); 24] = [
    (0.625, 6.375),
    (4.0, 6.375),
    (0.625, 5.5),
    (1.625, 5.5),
    (2.75, 5.5),
    (4.0, 5.5),
    (5.25, 4.75),
    (4.0, 4.75),
    (2.75, 4.75),
    (2.75, 4.0),
    (1.625, 4.0),
    (0.625, 4.0),
    (0.625, 0.625),
    (1.625, 2.375),
    (2.75, 2.375),
    (4.0, 4.0),
    (4.0, 3.25),
    (5.25, 4.0),
    (4.0, 2.375),
    (4.0, 0.625),
    (2.75, 0.625),
    (2.75, 1.625),
    (1.625, 1.625),
    (1.625, 0.625),
];

pub const SIOUX_FALLS_EDGES: [(usize, usize, f64); 38] = [
    (1, 2, 6.0),
    (1, 3, 4.0),
    (2, 6, 5.0),
    (3, 4, 4.0),
    (3, 12, 4.0),
    (4, 5, 2.0),
    (4, 11, 6.0),
    (5, 6, 4.0),
    (5, 9, 5.0),
    (6, 8, 2.0),
    (7, 8, 3.0),
    (7, 18, 2.0),
    (8, 9, 10.0),
    (8, 16, 5.0),
    (9, 10, 3.0),
    (10, 11, 5.0),
    (10, 15, 6.0),
    (10, 16, 4.0),
    (10, 17, 8.0),
    (11, 12, 6.0),
    (11, 14, 4.0),
    (12, 13, 3.0),
    (13, 24, 4.0),
    (14, 15, 5.0),
    (14, 23, 4.0),
    (15, 19, 3.0),
    (15, 22, 3.0),
    (16, 17, 2.0),
    (16, 18, 3.0),
    (17, 19, 2.0),
    (18, 20, 4.0),
    (19, 20, 4.0),
    (20, 21, 6.0),
    (20, 22, 5.0),
    (21, 22, 2.0),
    (21, 24, 3.0),
    (22, 23, 4.0),
    (23, 24, 2.0),
];

/// One zone per road node, a centroid next to each node, four bus lines
/// along main corridors and gravity demand.
pub fn sioux_falls_shaped(seed: u64) -> Instance {
    let config = DesignConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetworkBuilder::new();
    let road: Vec<usize> = SIOUX_FALLS_NODES
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            b.add_node(&format!("{}", i + 1), NodeKind::RoadIntersection, &format!("z{}", i + 1), x, y)
        })
        .collect();
    let centroids: Vec<usize> = SIOUX_FALLS_NODES
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            b.add_node(&format!("c{}", i + 1), NodeKind::Centroid, &format!("z{}", i + 1), x + 0.1, y + 0.1)
        })
        .collect();
    for &(u, v, t) in &SIOUX_FALLS_EDGES {
        b.add_link(road[u - 1], road[v - 1], LinkKind::Road, t, 0.0);
        b.add_link(road[v - 1], road[u - 1], LinkKind::Road, t, 0.0);
    }
    let corridors: [(&str, &[usize]); 4] = [
        ("SF1", &[1, 3, 12, 13, 24, 21, 20]),
        ("SF2", &[2, 6, 8, 16, 17, 19, 20]),
        ("SF3", &[4, 5, 9, 10, 15, 22, 23]),
        ("SF4", &[7, 18, 16, 10, 11, 14, 23]),
    ];
    for (li, (id, path)) in corridors.iter().enumerate() {
        let dx = -0.05 - 0.02 * li as f64;
        let stops: Vec<usize> = path
            .iter()
            .map(|&n| {
                let (x, y) = SIOUX_FALLS_NODES[n - 1];
                b.add_node(&format!("{}_{}", id, n), NodeKind::TransitStop, &format!("z{}", n), x + dx, y - 0.05)
            })
            .collect();
        let edge_time = |u: usize, v: usize| {
            SIOUX_FALLS_EDGES
                .iter()
                .find(|e| (e.0 == u && e.1 == v) || (e.0 == v && e.1 == u))
                .map(|e| e.2 * 1.5)
                .expect("corridor follows road edges")
        };
        let mut seq = stops.clone();
        seq.extend(stops.iter().rev().skip(1));
        let mut nodes: Vec<usize> = path.to_vec();
        nodes.extend(path.iter().rev().skip(1));
        let times: Vec<f64> = nodes.windows(2).map(|w| edge_time(w[0], w[1])).collect();
        b.add_line(id, &seq, &times, true);
    }
    for (i, &o) in centroids.iter().enumerate() {
        for (j, &d) in centroids.iter().enumerate() {
            if i == j {
                continue;
            }
            let (po, pd) = (SIOUX_FALLS_NODES[i], SIOUX_FALLS_NODES[j]);
            let dist = ((po.0 - pd.0).powi(2) + (po.1 - pd.1).powi(2)).sqrt();
            let trips = (rng.gen_range(10.0..60.0) * (-dist / 4.0).exp()).round();
            if trips > 0.0 {
                b.add_demand(o, d, trips);
            }
        }
    }
    let net = b
        .build()
        .expect("sioux falls instance is valid")
        .build_walking_links(config.walk_distance, config.walk_speed_mph, None)
        .with_fares(&config.fares());
    Instance {
        name: "sioux-falls".into(),
        net,
        config,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_shape() {
        let inst = fig1();
        let net = &inst.net;
        assert_eq!(net.lines.len(), 3);
        assert_eq!(net.zones.len(), 2);
        assert!(net.is_waiting(net.node_by_id("1").unwrap()));
        assert!(!net.is_waiting(net.node_by_id("8").unwrap()));
        assert!(net.check_road_connected());
        assert!(fig1_design().is_feasible(net, &inst.config));
    }

    #[test]
    fn toys_are_small_and_connected() {
        for inst in toy_instances() {
            assert!(inst.net.zones.len() <= 4, "{}", inst.name);
            assert!(inst.net.lines.len() <= 3);
            assert!(inst.config.frequencies.len() <= 3 && inst.config.fleet_sizes.len() <= 3);
            assert!(inst.net.check_road_connected(), "{}", inst.name);
            assert!(inst.net.count_links(LinkKind::AccessWalk) > 0);
        }
    }

    #[test]
    fn midsize_dimensions() {
        let inst = midsize();
        assert_eq!(inst.net.zones.len(), 24);
        assert_eq!(inst.net.lines.len(), 12);
        let n = inst.net.num_nodes();
        assert!((450..=550).contains(&n), "{} nodes", n);
        assert!(inst.net.check_road_connected());
    }

    #[test]
    fn sioux_falls_road_graph() {
        let inst = sioux_falls_shaped(7);
        assert_eq!(inst.net.count_links(LinkKind::Road), 76);
        assert!(inst.net.check_road_connected());
    }
}
