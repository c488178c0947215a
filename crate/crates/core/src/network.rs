//! Multimodal network: road, transit and walking layers over a set of zones.
//!
//! The network is assembled through [`NetworkBuilder`] (or [`load_network`]
//! for CSV input) and is immutable afterwards. Node, link, line and zone
//! references are dense indices into the corresponding vectors.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    RoadIntersection,
    TransitStop,
    Centroid,
}

impl NodeKind {
    pub fn parse(s: &str) -> Option<NodeKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "road" | "roadintersection" | "intersection" => Some(NodeKind::RoadIntersection),
            "stop" | "transitstop" | "transit" => Some(NodeKind::TransitStop),
            "centroid" | "zone" => Some(NodeKind::Centroid),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::RoadIntersection => "road",
            NodeKind::TransitStop => "stop",
            NodeKind::Centroid => "centroid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Transit,
    Road,
    AccessWalk,
    EgressWalk,
    TransitTransfer,
    ModeTransfer,
}

impl LinkKind {
    pub fn parse(s: &str) -> Option<LinkKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transit" => Some(LinkKind::Transit),
            "road" => Some(LinkKind::Road),
            "access" | "accesswalk" => Some(LinkKind::AccessWalk),
            "egress" | "egresswalk" => Some(LinkKind::EgressWalk),
            "transfer" | "transittransfer" => Some(LinkKind::TransitTransfer),
            "mode_transfer" | "modetransfer" => Some(LinkKind::ModeTransfer),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Transit => "transit",
            LinkKind::Road => "road",
            LinkKind::AccessWalk => "access",
            LinkKind::EgressWalk => "egress",
            LinkKind::TransitTransfer => "transfer",
            LinkKind::ModeTransfer => "mode_transfer",
        }
    }

    pub fn is_walking(self) -> bool {
        matches!(
            self,
            LinkKind::AccessWalk
                | LinkKind::EgressWalk
                | LinkKind::TransitTransfer
                | LinkKind::ModeTransfer
        )
    }

    /// Kinds whose heads are waiting nodes.
    pub fn creates_waiting_node(self) -> bool {
        matches!(
            self,
            LinkKind::AccessWalk | LinkKind::TransitTransfer | LinkKind::ModeTransfer
        )
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub zone: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Link {
    pub tail: usize,
    pub head: usize,
    pub kind: LinkKind,
    /// Minutes.
    pub travel_time: f64,
    /// Currency units.
    pub fare: f64,
    pub line: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitLine {
    pub id: String,
    pub stops: Vec<usize>,
    pub links: Vec<usize>,
    /// Minutes, summed over the line's links.
    pub one_way_time: f64,
    /// Candidate lines may be closed by the design; others must stay open.
    pub candidate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    pub centroid: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DemandEntry {
    pub origin: usize,
    pub destination: usize,
    pub trips: f64,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}, row {row}: {msg}")]
    Row { file: String, row: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

fn row_err(file: &str, row: usize, msg: impl Into<String>) -> NetworkError {
    NetworkError::Row {
        file: file.to_string(),
        row,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultimodalNetwork {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub lines: Vec<TransitLine>,
    pub zones: Vec<Zone>,
    pub demand: Vec<DemandEntry>,
    fs: Vec<Vec<usize>>,
    bs: Vec<Vec<usize>>,
    waiting: Vec<bool>,
    node_index: HashMap<String, usize>,
}

impl MultimodalNetwork {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn forward_star(&self, i: usize) -> &[usize] {
        &self.fs[i]
    }

    pub fn backward_star(&self, i: usize) -> &[usize] {
        &self.bs[i]
    }

    pub fn is_waiting(&self, i: usize) -> bool {
        self.waiting[i]
    }

    pub fn waiting_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.waiting[i]).collect()
    }

    pub fn node_by_id(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn zone_by_id(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    pub fn line_by_id(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn links_of_kind(&self, kind: LinkKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.links.len()).filter(move |&a| self.links[a].kind == kind)
    }

    pub fn count_links(&self, kind: LinkKind) -> usize {
        self.links_of_kind(kind).count()
    }

    /// Destinations in increasing node order: centroids with positive inbound demand.
    pub fn destinations(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self
            .demand
            .iter()
            .filter(|e| e.trips > 0.0)
            .map(|e| e.destination)
            .collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn origins(&self) -> Vec<usize> {
        let mut o: Vec<usize> = self
            .demand
            .iter()
            .filter(|e| e.trips > 0.0)
            .map(|e| e.origin)
            .collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().map(|e| e.trips).sum()
    }

    /// `g_ik` for destination `k` over all nodes.
    pub fn demand_vector(&self, k: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.nodes.len()];
        for e in &self.demand {
            if e.destination == k && e.origin != k {
                g[e.origin] += e.trips;
                g[k] -= e.trips;
            }
        }
        g
    }

    /// Transit lines serving each stop.
    pub fn lines_at_stops(&self) -> Vec<Vec<usize>> {
        let mut at = vec![Vec::new(); self.nodes.len()];
        for (l, line) in self.lines.iter().enumerate() {
            for &s in &line.stops {
                if !at[s].contains(&l) {
                    at[s].push(l);
                }
            }
        }
        at
    }

    /// Whether every destination can be reached from every centroid and
    /// road intersection using road and walking links only.
    pub fn check_road_connected(&self) -> bool {
        self.road_disconnected_pairs().is_empty()
    }

    /// `(node, destination)` pairs violating road connectivity.
    pub fn road_disconnected_pairs(&self) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for k in self.destinations() {
            let reach = self.reverse_reachable(k, |l| l.kind != LinkKind::Transit);
            for (i, n) in self.nodes.iter().enumerate() {
                if matches!(n.kind, NodeKind::Centroid | NodeKind::RoadIntersection) && !reach[i] {
                    bad.push((i, k));
                }
            }
        }
        bad
    }

    /// Nodes that can reach `target` through links accepted by `keep`.
    pub fn reverse_reachable<F: Fn(&Link) -> bool>(&self, target: usize, keep: F) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        seen[target] = true;
        queue.push_back(target);
        while let Some(j) = queue.pop_front() {
            for &a in &self.bs[j] {
                let link = &self.links[a];
                if keep(link) && !seen[link.tail] {
                    seen[link.tail] = true;
                    queue.push_back(link.tail);
                }
            }
        }
        seen
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (&self.nodes[a], &self.nodes[b]);
        ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
    }

    /// Adds walking links between nodes closer than `zeta` (Euclidean, or
    /// `distances` when a pair is listed there). Links that already exist
    /// are kept, so repeated calls are no-ops.
    pub fn build_walking_links(
        &self,
        zeta: f64,
        walk_speed_mph: f64,
        distances: Option<&HashMap<(usize, usize), f64>>,
    ) -> MultimodalNetwork {
        let dist = |a: usize, b: usize| -> f64 {
            distances
                .and_then(|m| m.get(&(a, b)).or_else(|| m.get(&(b, a))))
                .copied()
                .unwrap_or_else(|| self.distance(a, b))
        };
        let minutes = |d: f64| d / walk_speed_mph * 60.0;
        let lines_at = self.lines_at_stops();
        let mut existing: HashSet<(usize, usize, LinkKind)> = self
            .links
            .iter()
            .map(|l| (l.tail, l.head, l.kind))
            .collect();
        let mut links = self.links.clone();
        let mut push = |tail: usize, head: usize, kind: LinkKind, d: f64| {
            if existing.insert((tail, head, kind)) {
                links.push(Link {
                    tail,
                    head,
                    kind,
                    travel_time: minutes(d),
                    fare: 0.0,
                    line: None,
                });
            }
        };
        let n = self.nodes.len();
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let (ka, kb) = (self.nodes[a].kind, self.nodes[b].kind);
                let relevant = match (ka, kb) {
                    (NodeKind::Centroid, NodeKind::Centroid) => false,
                    (NodeKind::Centroid, _) | (_, NodeKind::Centroid) => true,
                    (NodeKind::RoadIntersection, NodeKind::TransitStop)
                    | (NodeKind::TransitStop, NodeKind::RoadIntersection) => true,
                    (NodeKind::TransitStop, NodeKind::TransitStop) => {
                        let (la, lb) = (&lines_at[a], &lines_at[b]);
                        la.iter().any(|x| lb.iter().any(|y| x != y))
                    }
                    _ => false,
                };
                if !relevant {
                    continue;
                }
                let d = dist(a, b);
                if d > zeta {
                    continue;
                }
                match (ka, kb) {
                    (NodeKind::Centroid, _) => push(a, b, LinkKind::AccessWalk, d),
                    (_, NodeKind::Centroid) => push(a, b, LinkKind::EgressWalk, d),
                    (NodeKind::TransitStop, NodeKind::TransitStop) => {
                        push(a, b, LinkKind::TransitTransfer, d)
                    }
                    _ => push(a, b, LinkKind::ModeTransfer, d),
                }
            }
        }
        let mut b = NetworkBuilder::from_network(self);
        b.links = links;
        b.build().expect("walking links keep a valid network valid")
    }

    /// Replaces link fares according to `policy`.
    pub fn with_fares(&self, policy: &FarePolicy) -> MultimodalNetwork {
        let mut net = self.clone();
        policy.apply(&mut net);
        net
    }

    /// Copy of the network without road links (transit and walking only).
    pub fn transit_only(&self) -> MultimodalNetwork {
        let mut b = NetworkBuilder::from_network(self);
        let keep: Vec<Link> = self
            .links
            .iter()
            .filter(|l| l.kind != LinkKind::Road)
            .cloned()
            .collect();
        // remap line link indices
        let mut remap = vec![usize::MAX; self.links.len()];
        let mut next = 0;
        for (a, l) in self.links.iter().enumerate() {
            if l.kind != LinkKind::Road {
                remap[a] = next;
                next += 1;
            }
        }
        for line in b.lines.iter_mut() {
            line.links = line.links.iter().map(|&a| remap[a]).collect();
        }
        b.links = keep;
        b.build().expect("dropping road links keeps the network valid")
    }

    /// Copy of the network keeping only the demand entries accepted by `keep`.
    pub fn with_demand_filter<F: Fn(&DemandEntry) -> bool>(&self, keep: F) -> MultimodalNetwork {
        let mut net = self.clone();
        net.demand.retain(|e| keep(e));
        net
    }
}

/// Generalized cost of a link in minutes: travel time plus fare converted
/// at the value of time (currency per hour).
pub fn link_cost(link: &Link, value_of_time: f64) -> f64 {
    link.travel_time + link.fare / value_of_time * 60.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarePolicy {
    /// Flat fare charged when entering a stop from a centroid or the road layer.
    pub transit_fare: f64,
    /// Charged on every road link leaving a waiting node.
    pub mod_base_fare: f64,
    /// Per minute of road travel.
    pub mod_fare_per_min: f64,
}

impl Default for FarePolicy {
    fn default() -> Self {
        FarePolicy {
            transit_fare: 2.0,
            mod_base_fare: 0.8,
            mod_fare_per_min: 0.21,
        }
    }
}

impl FarePolicy {
    pub fn apply(&self, net: &mut MultimodalNetwork) {
        for a in 0..net.links.len() {
            let (kind, tail, head, t) = {
                let l = &net.links[a];
                (l.kind, l.tail, l.head, l.travel_time)
            };
            let fare = match kind {
                LinkKind::AccessWalk | LinkKind::ModeTransfer
                    if net.nodes[head].kind == NodeKind::TransitStop =>
                {
                    self.transit_fare
                }
                LinkKind::Road => {
                    let base = if net.waiting[tail] { self.mod_base_fare } else { 0.0 };
                    base + self.mod_fare_per_min * t
                }
                _ => 0.0,
            };
            net.links[a].fare = fare;
        }
    }
}

/// Incremental construction with validation at [`NetworkBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub lines: Vec<TransitLine>,
    pub zones: Vec<Zone>,
    pub demand: Vec<DemandEntry>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_network(net: &MultimodalNetwork) -> Self {
        NetworkBuilder {
            nodes: net.nodes.clone(),
            links: net.links.clone(),
            lines: net.lines.clone(),
            zones: net.zones.clone(),
            demand: net.demand.clone(),
        }
    }

    pub fn zone(&mut self, id: &str) -> usize {
        if let Some(z) = self.zones.iter().position(|z| z.id == id) {
            return z;
        }
        self.zones.push(Zone {
            id: id.to_string(),
            centroid: None,
        });
        self.zones.len() - 1
    }

    pub fn add_node(&mut self, id: &str, kind: NodeKind, zone: &str, x: f64, y: f64) -> usize {
        let z = self.zone(zone);
        self.nodes.push(Node {
            id: id.to_string(),
            kind,
            zone: z,
            x,
            y,
        });
        self.nodes.len() - 1
    }

    pub fn add_link(
        &mut self,
        tail: usize,
        head: usize,
        kind: LinkKind,
        travel_time: f64,
        fare: f64,
    ) -> usize {
        self.links.push(Link {
            tail,
            head,
            kind,
            travel_time,
            fare,
            line: None,
        });
        self.links.len() - 1
    }

    /// Adds a line through `stops`, creating one transit link per
    /// consecutive pair with the given travel times.
    pub fn add_line(&mut self, id: &str, stops: &[usize], times: &[f64], candidate: bool) -> usize {
        assert_eq!(stops.len(), times.len() + 1, "one travel time per hop");
        let l = self.lines.len();
        let mut links = Vec::with_capacity(times.len());
        for (w, &t) in stops.windows(2).zip(times) {
            let a = self.add_link(w[0], w[1], LinkKind::Transit, t, 0.0);
            self.links[a].line = Some(l);
            links.push(a);
        }
        self.lines.push(TransitLine {
            id: id.to_string(),
            stops: stops.to_vec(),
            links,
            one_way_time: times.iter().sum(),
            candidate,
        });
        l
    }

    pub fn add_demand(&mut self, origin: usize, destination: usize, trips: f64) {
        self.demand.push(DemandEntry {
            origin,
            destination,
            trips,
        });
    }

    pub fn build(mut self) -> Result<MultimodalNetwork, NetworkError> {
        let n = self.nodes.len();
        let mut node_index = HashMap::with_capacity(n);
        for (i, node) in self.nodes.iter().enumerate() {
            if node_index.insert(node.id.clone(), i).is_some() {
                return Err(NetworkError::Invalid(format!("duplicate node id '{}'", node.id)));
            }
            if node.zone >= self.zones.len() {
                return Err(NetworkError::Invalid(format!("node '{}' has no zone", node.id)));
            }
        }
        for z in self.zones.iter_mut() {
            z.centroid = None;
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.kind == NodeKind::Centroid {
                let z = &mut self.zones[node.zone];
                if z.centroid.is_some() {
                    return Err(NetworkError::Invalid(format!(
                        "zone '{}' has more than one centroid",
                        z.id
                    )));
                }
                z.centroid = Some(i);
            }
        }
        let mut seen = HashSet::new();
        for (a, l) in self.links.iter().enumerate() {
            if l.tail >= n || l.head >= n {
                return Err(NetworkError::Invalid(format!("link {} references a missing node", a)));
            }
            if l.tail == l.head {
                return Err(NetworkError::Invalid(format!("link {} is a self loop", a)));
            }
            if !(l.travel_time >= 0.0) || !l.travel_time.is_finite() {
                return Err(NetworkError::Invalid(format!(
                    "link {} has invalid travel time {}",
                    a, l.travel_time
                )));
            }
            if !(l.fare >= 0.0) {
                return Err(NetworkError::Invalid(format!("link {} has negative fare", a)));
            }
            if !seen.insert((l.tail, l.head, l.kind, l.line)) {
                return Err(NetworkError::Invalid(format!(
                    "duplicate {} link {} -> {}",
                    l.kind, self.nodes[l.tail].id, self.nodes[l.head].id
                )));
            }
            let (kt, kh) = (self.nodes[l.tail].kind, self.nodes[l.head].kind);
            let ok = match l.kind {
                LinkKind::Transit => {
                    kt == NodeKind::TransitStop && kh == NodeKind::TransitStop && l.line.is_some()
                }
                LinkKind::Road => kt != NodeKind::Centroid && kh != NodeKind::Centroid,
                LinkKind::AccessWalk => kt == NodeKind::Centroid && kh != NodeKind::Centroid,
                LinkKind::EgressWalk => kt != NodeKind::Centroid && kh == NodeKind::Centroid,
                LinkKind::TransitTransfer => {
                    kt == NodeKind::TransitStop && kh == NodeKind::TransitStop
                }
                LinkKind::ModeTransfer => {
                    (kt == NodeKind::TransitStop && kh == NodeKind::RoadIntersection)
                        || (kt == NodeKind::RoadIntersection && kh == NodeKind::TransitStop)
                }
            };
            if !ok {
                return Err(NetworkError::Invalid(format!(
                    "{} link {} -> {} connects {} to {}",
                    l.kind,
                    self.nodes[l.tail].id,
                    self.nodes[l.head].id,
                    kt.as_str(),
                    kh.as_str()
                )));
            }
            if l.kind != LinkKind::Transit && l.line.is_some() {
                return Err(NetworkError::Invalid(format!("non-transit link {} carries a line", a)));
            }
        }
        for (li, line) in self.lines.iter_mut().enumerate() {
            if line.links.is_empty() {
                return Err(NetworkError::Invalid(format!("line '{}' has no links", line.id)));
            }
            let mut t = 0.0;
            for (h, &a) in line.links.iter().enumerate() {
                let link = self
                    .links
                    .get(a)
                    .ok_or_else(|| NetworkError::Invalid(format!("line '{}' link missing", line.id)))?;
                if link.line != Some(li)
                    || link.tail != line.stops[h]
                    || link.head != line.stops[h + 1]
                {
                    return Err(NetworkError::Invalid(format!(
                        "line '{}' links do not follow its stop sequence",
                        line.id
                    )));
                }
                t += link.travel_time;
            }
            line.one_way_time = t;
        }
        for (a, l) in self.links.iter().enumerate() {
            if let Some(li) = l.line {
                if li >= self.lines.len() || !self.lines[li].links.contains(&a) {
                    return Err(NetworkError::Invalid(format!(
                        "transit link {} -> {} is not part of its line's stop sequence",
                        self.nodes[l.tail].id, self.nodes[l.head].id
                    )));
                }
            }
        }
        for e in &self.demand {
            if e.origin >= n || e.destination >= n {
                return Err(NetworkError::Invalid("demand references a missing node".into()));
            }
            if self.nodes[e.origin].kind != NodeKind::Centroid
                || self.nodes[e.destination].kind != NodeKind::Centroid
            {
                return Err(NetworkError::Invalid(format!(
                    "demand {} -> {} must connect centroids",
                    self.nodes[e.origin].id, self.nodes[e.destination].id
                )));
            }
            if !(e.trips >= 0.0) || !e.trips.is_finite() {
                return Err(NetworkError::Invalid(format!(
                    "demand {} -> {} has invalid trips",
                    self.nodes[e.origin].id, self.nodes[e.destination].id
                )));
            }
        }
        let mut fs = vec![Vec::new(); n];
        let mut bs = vec![Vec::new(); n];
        let mut waiting = vec![false; n];
        for (a, l) in self.links.iter().enumerate() {
            fs[l.tail].push(a);
            bs[l.head].push(a);
            if l.kind.creates_waiting_node() {
                waiting[l.head] = true;
            }
        }
        Ok(MultimodalNetwork {
            nodes: self.nodes,
            links: self.links,
            lines: self.lines,
            zones: self.zones,
            demand: self.demand,
            fs,
            bs,
            waiting,
            node_index,
        })
    }
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    #[serde(rename = "nodeId")]
    id: String,
    x: f64,
    y: f64,
    kind: String,
    zone: String,
}

#[derive(Debug, Deserialize)]
struct LinkRow {
    #[serde(rename = "fromNodeId")]
    from: String,
    #[serde(rename = "toNodeId")]
    to: String,
    kind: String,
    #[serde(rename = "travelTime")]
    travel_time: f64,
    #[serde(default)]
    fare: Option<f64>,
    #[serde(rename = "lineId", default)]
    line: Option<String>,
}

#[derive(Debug, Deserialize)]
struct LineRow {
    #[serde(rename = "lineId")]
    id: String,
    #[serde(rename = "stopSequence")]
    stops: String,
    #[serde(default)]
    candidate: Option<String>,
}

#[derive(Debug, Deserialize)]
struct DemandRow {
    origin: String,
    destination: String,
    trips: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>, NetworkError> {
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => NetworkError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => NetworkError::Invalid(format!("{}: {:?}", path.display(), other)),
        })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<T>().enumerate() {
        // data rows start on line 2
        let row = i + 2;
        let rec = rec.map_err(|e| row_err(&file, row, e.to_string()))?;
        out.push((row, rec));
    }
    Ok(out)
}

/// Paths of the four CSV tables of a network directory.
#[derive(Debug, Clone)]
pub struct NetworkFiles {
    pub nodes: PathBuf,
    pub links: PathBuf,
    pub lines: PathBuf,
    pub demand: PathBuf,
}

impl NetworkFiles {
    pub fn in_dir(dir: &Path) -> Self {
        NetworkFiles {
            nodes: dir.join("nodes.csv"),
            links: dir.join("links.csv"),
            lines: dir.join("lines.csv"),
            demand: dir.join("demand.csv"),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.nodes, &self.links, &self.lines, &self.demand]
    }
}

/// Loads `nodes.csv`, `links.csv`, `lines.csv` and `demand.csv`.
///
/// `lines.csv` has columns `lineId,stopSequence,candidate` where the stop
/// sequence is `;`-separated node ids. Every transit link in `links.csv`
/// must belong to the line named in its `lineId` column.
pub fn load_network(files: &NetworkFiles) -> Result<MultimodalNetwork, NetworkError> {
    for p in files.all() {
        if !p.exists() {
            return Err(NetworkError::Io {
                path: p.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            });
        }
    }
    let mut b = NetworkBuilder::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (row, r) in read_rows::<NodeRow>(&files.nodes)? {
        let kind = NodeKind::parse(&r.kind)
            .ok_or_else(|| row_err("nodes.csv", row, format!("unknown node kind '{}'", r.kind)))?;
        if index.contains_key(&r.id) {
            return Err(row_err("nodes.csv", row, format!("duplicate node id '{}'", r.id)));
        }
        if !r.x.is_finite() || !r.y.is_finite() {
            return Err(row_err("nodes.csv", row, "non-finite coordinate"));
        }
        let i = b.add_node(&r.id, kind, &r.zone, r.x, r.y);
        index.insert(r.id, i);
    }
    for z in &b.zones {
        let has_centroid = b
            .nodes
            .iter()
            .any(|n| n.kind == NodeKind::Centroid && b.zones[n.zone].id == z.id);
        if !has_centroid {
            log::debug!("zone {} has no centroid", z.id);
        }
    }
    let node = |file: &str, row: usize, id: &str| -> Result<usize, NetworkError> {
        index
            .get(id)
            .copied()
            .ok_or_else(|| row_err(file, row, format!("unknown node '{}'", id)))
    };

    let mut line_rows = Vec::new();
    let mut line_index: HashMap<String, usize> = HashMap::new();
    for (row, r) in read_rows::<LineRow>(&files.lines)? {
        let stops: Vec<usize> = r
            .stops
            .split(';')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| node("lines.csv", row, s))
            .collect::<Result<_, _>>()?;
        if stops.len() < 2 {
            return Err(row_err("lines.csv", row, "a line needs at least two stops"));
        }
        let candidate = match r.candidate.as_deref().map(|s| s.to_ascii_lowercase()) {
            None => true,
            Some(s) if s.is_empty() || s == "true" || s == "1" || s == "yes" => true,
            Some(s) if s == "false" || s == "0" || s == "no" => false,
            Some(s) => {
                return Err(row_err("lines.csv", row, format!("bad candidate flag '{}'", s)))
            }
        };
        if line_index.insert(r.id.clone(), line_rows.len()).is_some() {
            return Err(row_err("lines.csv", row, format!("duplicate line '{}'", r.id)));
        }
        line_rows.push((row, r.id, stops, candidate));
    }
    let mut line_links: Vec<Vec<Option<usize>>> = line_rows
        .iter()
        .map(|(_, _, stops, _)| vec![None; stops.len() - 1])
        .collect();
    let mut seen = HashSet::new();
    for (row, r) in read_rows::<LinkRow>(&files.links)? {
        let kind = LinkKind::parse(&r.kind)
            .ok_or_else(|| row_err("links.csv", row, format!("unknown link kind '{}'", r.kind)))?;
        let tail = node("links.csv", row, &r.from)?;
        let head = node("links.csv", row, &r.to)?;
        if !(r.travel_time >= 0.0) {
            return Err(row_err("links.csv", row, format!("negative travel time {}", r.travel_time)));
        }
        let fare = r.fare.unwrap_or(0.0);
        if fare < 0.0 {
            return Err(row_err("links.csv", row, "negative fare"));
        }
        let line = match r.line.as_deref().filter(|s| !s.is_empty()) {
            Some(id) => Some(
                *line_index
                    .get(id)
                    .ok_or_else(|| row_err("links.csv", row, format!("unknown line '{}'", id)))?,
            ),
            None => None,
        };
        if (kind == LinkKind::Transit) != line.is_some() {
            return Err(row_err(
                "links.csv",
                row,
                "transit links need a lineId and other links must not have one",
            ));
        }
        if !seen.insert((tail, head, kind, line)) {
            return Err(row_err("links.csv", row, format!("duplicate link {} -> {}", r.from, r.to)));
        }
        let a = b.add_link(tail, head, kind, r.travel_time, fare);
        if let Some(l) = line {
            b.links[a].line = Some(l);
            let stops = &line_rows[l].2;
            let hop = stops
                .windows(2)
                .position(|w| w[0] == tail && w[1] == head)
                .ok_or_else(|| {
                    row_err(
                        "links.csv",
                        row,
                        format!("link {} -> {} is not a hop of line '{}'", r.from, r.to, line_rows[l].1),
                    )
                })?;
            line_links[l][hop] = Some(a);
        }
    }
    for ((row, id, stops, candidate), links) in line_rows.into_iter().zip(line_links) {
        let links: Vec<usize> = links
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| row_err("lines.csv", row, format!("line '{}' misses transit links", id)))?;
        b.lines.push(TransitLine {
            id,
            stops,
            links,
            one_way_time: 0.0,
            candidate,
        });
    }
    for (row, r) in read_rows::<DemandRow>(&files.demand)? {
        let o = node("demand.csv", row, &r.origin)?;
        let d = node("demand.csv", row, &r.destination)?;
        if o == d {
            return Err(row_err("demand.csv", row, "origin equals destination"));
        }
        if !(r.trips >= 0.0) || !r.trips.is_finite() {
            return Err(row_err("demand.csv", row, "trips must be nonnegative"));
        }
        if b.nodes[o].kind != NodeKind::Centroid || b.nodes[d].kind != NodeKind::Centroid {
            return Err(row_err("demand.csv", row, "origin and destination must be centroids"));
        }
        b.add_demand(o, d, r.trips);
    }
    b.build()
}

/// Writes the network as the four CSV tables into `dir`.
pub fn write_network(net: &MultimodalNetwork, dir: &Path) -> Result<(), NetworkError> {
    let io = |path: &Path, e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => NetworkError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => NetworkError::Invalid(format!("{}: {:?}", path.display(), other)),
    };
    std::fs::create_dir_all(dir).map_err(|source| NetworkError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = NetworkFiles::in_dir(dir);

    let mut w = csv::Writer::from_path(&files.nodes).map_err(|e| io(&files.nodes, e))?;
    w.write_record(["nodeId", "x", "y", "kind", "zone"])
        .map_err(|e| io(&files.nodes, e))?;
    for n in &net.nodes {
        w.write_record([
            n.id.clone(),
            n.x.to_string(),
            n.y.to_string(),
            n.kind.as_str().to_string(),
            net.zones[n.zone].id.clone(),
        ])
        .map_err(|e| io(&files.nodes, e))?;
    }
    w.flush().map_err(|source| NetworkError::Io {
        path: files.nodes.clone(),
        source,
    })?;

    let mut w = csv::Writer::from_path(&files.links).map_err(|e| io(&files.links, e))?;
    w.write_record(["fromNodeId", "toNodeId", "kind", "travelTime", "fare", "lineId"])
        .map_err(|e| io(&files.links, e))?;
    for l in &net.links {
        w.write_record([
            net.nodes[l.tail].id.clone(),
            net.nodes[l.head].id.clone(),
            l.kind.as_str().to_string(),
            l.travel_time.to_string(),
            l.fare.to_string(),
            l.line.map(|x| net.lines[x].id.clone()).unwrap_or_default(),
        ])
        .map_err(|e| io(&files.links, e))?;
    }
    w.flush().map_err(|source| NetworkError::Io {
        path: files.links.clone(),
        source,
    })?;

    let mut w = csv::Writer::from_path(&files.lines).map_err(|e| io(&files.lines, e))?;
    w.write_record(["lineId", "stopSequence", "candidate"])
        .map_err(|e| io(&files.lines, e))?;
    for line in &net.lines {
        let stops: Vec<&str> = line.stops.iter().map(|&s| net.nodes[s].id.as_str()).collect();
        w.write_record([line.id.clone(), stops.join(";"), line.candidate.to_string()])
            .map_err(|e| io(&files.lines, e))?;
    }
    w.flush().map_err(|source| NetworkError::Io {
        path: files.lines.clone(),
        source,
    })?;

    let mut w = csv::Writer::from_path(&files.demand).map_err(|e| io(&files.demand, e))?;
    w.write_record(["origin", "destination", "trips"])
        .map_err(|e| io(&files.demand, e))?;
    for e in &net.demand {
        w.write_record([
            net.nodes[e.origin].id.clone(),
            net.nodes[e.destination].id.clone(),
            e.trips.to_string(),
        ])
        .map_err(|e| io(&files.demand, e))?;
    }
    w.flush().map_err(|source| NetworkError::Io {
        path: files.demand.clone(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> MultimodalNetwork {
        let mut b = NetworkBuilder::new();
        let a = b.add_node("a", NodeKind::RoadIntersection, "z", 0.0, 0.0);
        let c = b.add_node("b", NodeKind::RoadIntersection, "z", 1.0, 0.0);
        b.add_link(a, c, LinkKind::Road, 2.0, 0.0);
        b.build().unwrap()
    }

    #[test]
    fn stars_are_consistent() {
        let net = two_node();
        assert_eq!(net.num_nodes(), 2);
        assert_eq!(net.num_links(), 1);
        assert_eq!(net.forward_star(0), &[0]);
        assert_eq!(net.backward_star(1), &[0]);
        let total: usize = (0..2).map(|i| net.forward_star(i).len()).sum();
        assert_eq!(total, net.num_links());
    }

    #[test]
    fn link_cost_examples() {
        let mut l = Link {
            tail: 0,
            head: 1,
            kind: LinkKind::Transit,
            travel_time: 10.0,
            fare: 0.0,
            line: None,
        };
        assert!((link_cost(&l, 23.0) - 10.0).abs() < 1e-12);
        l.travel_time = 0.0;
        l.fare = 2.0;
        assert!((link_cost(&l, 23.0) - 5.217).abs() < 1e-3);
        l.travel_time = 5.0;
        l.fare = 0.21 * 5.0 + 0.8;
        assert!((link_cost(&l, 23.0) - 9.826).abs() < 1e-3);
    }

    #[test]
    fn transfer_links_only_between_distinct_lines() {
        let mut b = NetworkBuilder::new();
        let s1 = b.add_node("s1", NodeKind::TransitStop, "z", 0.0, 0.0);
        let s2 = b.add_node("s2", NodeKind::TransitStop, "z", 5.0, 0.0);
        let s3 = b.add_node("s3", NodeKind::TransitStop, "z", 0.4, 0.0);
        let s4 = b.add_node("s4", NodeKind::TransitStop, "z", 5.4, 0.0);
        b.add_line("red", &[s1, s2], &[10.0], true);
        b.add_line("blue", &[s3, s4], &[10.0], true);
        let net = b.build().unwrap().build_walking_links(0.5, 3.0, None);
        let transfers: Vec<(usize, usize)> = net
            .links_of_kind(LinkKind::TransitTransfer)
            .map(|a| (net.links[a].tail, net.links[a].head))
            .collect();
        assert_eq!(transfers.len(), 4);
        assert!(transfers.contains(&(s1, s3)) && transfers.contains(&(s3, s1)));
        assert!(transfers.contains(&(s2, s4)) && transfers.contains(&(s4, s2)));

        // same line within reach: nothing
        let mut b = NetworkBuilder::new();
        let s1 = b.add_node("s1", NodeKind::TransitStop, "z", 0.0, 0.0);
        let s2 = b.add_node("s2", NodeKind::TransitStop, "z", 0.3, 0.0);
        b.add_line("red", &[s1, s2], &[1.0], true);
        let net = b.build().unwrap().build_walking_links(0.5, 3.0, None);
        assert_eq!(net.count_links(LinkKind::TransitTransfer), 0);
    }

    #[test]
    fn access_and_egress_pairs() {
        let mut b = NetworkBuilder::new();
        let c = b.add_node("c", NodeKind::Centroid, "z", 0.0, 0.0);
        b.add_node("s", NodeKind::TransitStop, "z", 0.3, 0.0);
        b.add_node("r", NodeKind::RoadIntersection, "z", 0.0, 0.45);
        b.add_node("far", NodeKind::RoadIntersection, "z", 3.0, 0.0);
        let net = b.build().unwrap().build_walking_links(0.5, 3.0, None);
        assert_eq!(net.count_links(LinkKind::AccessWalk), 2);
        assert_eq!(net.count_links(LinkKind::EgressWalk), 2);
        // stop and road node are 0.54 apart: no mode transfer
        assert_eq!(net.count_links(LinkKind::ModeTransfer), 0);
        let acc = net.links_of_kind(LinkKind::AccessWalk).next().unwrap();
        assert_eq!(net.links[acc].tail, c);
        // 0.3 mi at 3 mph = 6 minutes
        let to_stop = net
            .links
            .iter()
            .find(|l| l.kind == LinkKind::AccessWalk && l.head == 1)
            .unwrap();
        assert!((to_stop.travel_time - 6.0).abs() < 1e-12);
        assert!(net.is_waiting(1) && net.is_waiting(2) && !net.is_waiting(c));
        // idempotent
        let again = net.build_walking_links(0.5, 3.0, None);
        assert_eq!(again.num_links(), net.num_links());
    }

    #[test]
    fn demand_vector_sums_to_zero() {
        let mut b = NetworkBuilder::new();
        let c1 = b.add_node("c1", NodeKind::Centroid, "1", 0.0, 0.0);
        let c2 = b.add_node("c2", NodeKind::Centroid, "2", 1.0, 0.0);
        let c3 = b.add_node("c3", NodeKind::Centroid, "3", 2.0, 0.0);
        b.add_demand(c1, c3, 10.0);
        b.add_demand(c2, c3, 5.0);
        b.add_demand(c3, c1, 1.0);
        let net = b.build().unwrap();
        let g = net.demand_vector(c3);
        assert_eq!(g, vec![10.0, 5.0, -15.0]);
        for k in net.destinations() {
            assert!(net.demand_vector(k).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn road_connectivity() {
        let mut b = NetworkBuilder::new();
        let r: Vec<usize> = (0..3)
            .map(|i| b.add_node(&format!("r{}", i), NodeKind::RoadIntersection, "z", i as f64, 0.0))
            .collect();
        b.add_link(r[0], r[1], LinkKind::Road, 1.0, 0.0);
        b.add_link(r[1], r[2], LinkKind::Road, 1.0, 0.0);
        b.add_link(r[2], r[0], LinkKind::Road, 1.0, 0.0);
        let c = b.add_node("c", NodeKind::Centroid, "z2", 0.0, 0.1);
        let d = b.add_node("d", NodeKind::Centroid, "z3", 2.0, 0.1);
        b.add_link(c, r[0], LinkKind::AccessWalk, 1.0, 0.0);
        b.add_link(r[2], d, LinkKind::EgressWalk, 1.0, 0.0);
        b.add_demand(c, d, 1.0);
        assert!(b.clone().build().unwrap().check_road_connected());

        let mut b2 = NetworkBuilder::new();
        let a = b2.add_node("a", NodeKind::RoadIntersection, "z", 0.0, 0.0);
        let bb = b2.add_node("b", NodeKind::RoadIntersection, "z", 1.0, 0.0);
        let c = b2.add_node("c", NodeKind::Centroid, "z1", 0.0, 0.0);
        let d = b2.add_node("d", NodeKind::Centroid, "z2", 1.0, 0.0);
        b2.add_link(c, a, LinkKind::AccessWalk, 1.0, 0.0);
        b2.add_link(bb, d, LinkKind::EgressWalk, 1.0, 0.0);
        b2.add_demand(c, d, 1.0);
        assert!(!b2.build().unwrap().check_road_connected());
    }

    #[test]
    fn rejects_dangling_and_negative() {
        let mut b = NetworkBuilder::new();
        let a = b.add_node("a", NodeKind::RoadIntersection, "z", 0.0, 0.0);
        b.add_link(a, 7, LinkKind::Road, 1.0, 0.0);
        assert!(b.build().is_err());
        let mut b = NetworkBuilder::new();
        let a = b.add_node("a", NodeKind::RoadIntersection, "z", 0.0, 0.0);
        let c = b.add_node("c", NodeKind::RoadIntersection, "z", 0.0, 0.0);
        b.add_link(a, c, LinkKind::Road, -1.0, 0.0);
        assert!(b.build().is_err());
    }
}
