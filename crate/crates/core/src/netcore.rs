//! Instance data model: the directed street graph with stress labels, the
//! arterial projects, and the OD pairs (followers), plus the synthetic grid
//! generator and the JSON instance file format.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::round3;

pub const INSTANCE_FORMAT: &str = "accessnet-instance";
pub const INSTANCE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("dangling edge endpoint: edge {edge} references node {node}")]
    DanglingEndpoint { edge: usize, node: usize },
    #[error("invalid instance at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid grid parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stress {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub coords: [f64; 2],
    pub stress: Stress,
    pub is_centroid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    pub travel_time: f64,
    pub stress: Stress,
    /// Construction cost; zero for low-stress edges.
    pub edge_cost: f64,
    pub project_id: Option<usize>,
}

/// Signalization cost of a high-stress node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCost {
    pub node: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: usize,
    pub edge_ids: Vec<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdPair {
    pub id: usize,
    pub origin: usize,
    pub destination: usize,
    pub weight: f64,
}

/// Which outgoing edges of a high-stress node are blocked while the node is
/// not crossable (not signalized and not all incident high-stress edges built).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingRule {
    /// Only outgoing high-stress edges are blocked.
    #[default]
    HighStressOutgoing,
    /// Every outgoing edge is blocked: the node cannot be passed through.
    AllOutgoing,
}

/// Outgoing/incoming edge lists per node in CSR layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Adjacency {
    out_start: Vec<usize>,
    out_edges: Vec<usize>,
    in_start: Vec<usize>,
    in_edges: Vec<usize>,
}

impl Adjacency {
    fn build(n_nodes: usize, edges: &[Edge]) -> Self {
        let mut out_deg = vec![0usize; n_nodes + 1];
        let mut in_deg = vec![0usize; n_nodes + 1];
        for e in edges {
            out_deg[e.tail + 1] += 1;
            in_deg[e.head + 1] += 1;
        }
        for i in 0..n_nodes {
            out_deg[i + 1] += out_deg[i];
            in_deg[i + 1] += in_deg[i];
        }
        let mut out_edges = vec![0; edges.len()];
        let mut in_edges = vec![0; edges.len()];
        let mut out_fill = out_deg.clone();
        let mut in_fill = in_deg.clone();
        for e in edges {
            out_edges[out_fill[e.tail]] = e.id;
            out_fill[e.tail] += 1;
            in_edges[in_fill[e.head]] = e.id;
            in_fill[e.head] += 1;
        }
        Adjacency {
            out_start: out_deg,
            out_edges,
            in_start: in_deg,
            in_edges,
        }
    }

    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.out_edges[self.out_start[node]..self.out_start[node + 1]]
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.in_edges[self.in_start[node]..self.in_start[node + 1]]
    }
}

/// The full instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub node_costs: Vec<NodeCost>,
    pub projects: Vec<Project>,
    pub od_pairs: Vec<OdPair>,
    pub crossing_rule: CrossingRule,
    adjacency: Adjacency,
    /// node id -> signal cost for high-stress nodes
    signal_cost: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u32,
    #[serde(default)]
    crossing_rule: CrossingRule,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_costs: Vec<NodeCost>,
    projects: Vec<Project>,
    od_pairs: Vec<OdPair>,
}

impl Network {
    /// Validates all referential and structural invariants and builds the
    /// adjacency index.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        node_costs: Vec<NodeCost>,
        projects: Vec<Project>,
        od_pairs: Vec<OdPair>,
        crossing_rule: CrossingRule,
    ) -> Result<Self, InstanceError> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(schema(
                    format!("nodes[{i}].id"),
                    "ids must be dense 0..|N|-1",
                ));
            }
            if n.is_centroid && n.stress == Stress::High {
                return Err(schema(
                    format!("nodes[{i}].stress"),
                    "centroids must be low-stress",
                ));
            }
        }
        let n_nodes = nodes.len();
        let mut edge_project_seen = vec![false; edges.len()];
        for (i, e) in edges.iter().enumerate() {
            if e.id != i {
                return Err(schema(
                    format!("edges[{i}].id"),
                    "ids must be dense 0..|E|-1",
                ));
            }
            for node in [e.tail, e.head] {
                if node >= n_nodes {
                    return Err(InstanceError::DanglingEndpoint { edge: i, node });
                }
            }
            if !(e.travel_time > 0.0) || !e.travel_time.is_finite() {
                return Err(schema(
                    format!("edges[{i}].travel_time"),
                    "must be positive",
                ));
            }
            if !(e.edge_cost >= 0.0) {
                return Err(schema(
                    format!("edges[{i}].edge_cost"),
                    "must be nonnegative",
                ));
            }
            match (e.stress, e.project_id) {
                (Stress::High, None) => {
                    return Err(schema(
                        format!("edges[{i}].project_id"),
                        "high-stress edge must belong to a project",
                    ))
                }
                (Stress::Low, Some(_)) => {
                    return Err(schema(
                        format!("edges[{i}].project_id"),
                        "low-stress edge cannot belong to a project",
                    ))
                }
                _ => {}
            }
        }
        for (pi, p) in projects.iter().enumerate() {
            if p.id != pi {
                return Err(schema(format!("projects[{pi}].id"), "ids must be dense"));
            }
            let mut total = 0.0;
            for (k, &eid) in p.edge_ids.iter().enumerate() {
                let path = format!("projects[{pi}].edge_ids[{k}]");
                let e = edges
                    .get(eid)
                    .ok_or_else(|| schema(&path, "unknown edge"))?;
                if e.project_id != Some(pi) {
                    return Err(schema(&path, "edge does not name this project"));
                }
                if edge_project_seen[eid] {
                    return Err(schema(&path, "edge listed twice"));
                }
                edge_project_seen[eid] = true;
                total += e.edge_cost;
            }
            if (total - p.cost).abs() > 1e-6 * (1.0 + total.abs()) {
                return Err(schema(
                    format!("projects[{pi}].cost"),
                    format!("cost {} differs from member edge sum {}", p.cost, total),
                ));
            }
        }
        for (i, e) in edges.iter().enumerate() {
            if let Some(pid) = e.project_id {
                if pid >= projects.len() || !edge_project_seen[i] {
                    return Err(schema(
                        format!("edges[{i}].project_id"),
                        "project does not list this edge",
                    ));
                }
            }
        }
        let mut signal_cost = vec![None; n_nodes];
        for (k, nc) in node_costs.iter().enumerate() {
            let path = format!("node_costs[{k}]");
            let node = nodes
                .get(nc.node)
                .ok_or_else(|| schema(&path, "unknown node"))?;
            if node.stress != Stress::High {
                return Err(schema(&path, "signal cost defined for a low-stress node"));
            }
            if !(nc.cost >= 0.0) {
                return Err(schema(&path, "cost must be nonnegative"));
            }
            if signal_cost[nc.node].is_some() {
                return Err(schema(&path, "duplicate node"));
            }
            signal_cost[nc.node] = Some(nc.cost);
        }
        for n in &nodes {
            if n.stress == Stress::High && signal_cost[n.id].is_none() {
                return Err(schema(
                    "node_costs",
                    format!("missing signal cost for high-stress node {}", n.id),
                ));
            }
        }
        for (i, od) in od_pairs.iter().enumerate() {
            if od.id != i {
                return Err(schema(format!("od_pairs[{i}].id"), "ids must be dense"));
            }
            if od.origin >= n_nodes || od.destination >= n_nodes {
                return Err(schema(format!("od_pairs[{i}]"), "unknown node"));
            }
            if od.origin == od.destination {
                return Err(schema(
                    format!("od_pairs[{i}]"),
                    "origin equals destination",
                ));
            }
            if !(od.weight > 0.0) {
                return Err(schema(format!("od_pairs[{i}].weight"), "must be positive"));
            }
        }
        let adjacency = Adjacency::build(n_nodes, &edges);
        Ok(Network {
            nodes,
            edges,
            node_costs,
            projects,
            od_pairs,
            crossing_rule,
            adjacency,
            signal_cost,
        })
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_projects(&self) -> usize {
        self.projects.len()
    }

    pub fn n_followers(&self) -> usize {
        self.od_pairs.len()
    }

    /// Signal cost b_i, `None` for low-stress nodes.
    pub fn signal_cost(&self, node: usize) -> Option<f64> {
        self.signal_cost[node]
    }

    pub fn high_stress_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.stress == Stress::High)
            .map(|n| n.id)
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.od_pairs.iter().map(|od| od.weight).collect()
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            format: INSTANCE_FORMAT.to_string(),
            version: INSTANCE_VERSION,
            crossing_rule: self.crossing_rule,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            node_costs: self.node_costs.clone(),
            projects: self.projects.clone(),
            od_pairs: self.od_pairs.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(path, e.into_inner().to_string())
        })?;
        if file.format != INSTANCE_FORMAT {
            return Err(schema("format", format!("expected {INSTANCE_FORMAT:?}")));
        }
        if file.version != INSTANCE_VERSION {
            return Err(schema(
                "version",
                format!("unsupported version {}", file.version),
            ));
        }
        Network::new(
            file.nodes,
            file.edges,
            file.node_costs,
            file.projects,
            file.od_pairs,
            file.crossing_rule,
        )
    }
}

pub fn save_instance(network: &Network, path: &Path) -> Result<(), InstanceError> {
    fs::write(path, network.to_json()).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_instance(path: &Path) -> Result<Network, InstanceError> {
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let net = Network::from_json(&text)?;
    if net.od_pairs.is_empty() {
        log::warn!("instance has no OD pairs; every design has objective 0");
    }
    Ok(net)
}

/// Parameters of the synthetic arterial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    /// Arterial grid cells per side; the grid has `(cells + 1)^2` arterial
    /// intersections and `2 * cells * (cells + 1)` arterial segments.
    pub cells: usize,
    pub minor_per_segment: usize,
    pub signal_prob: f64,
    pub centroids: usize,
    pub connect_prob: f64,
    pub time_range: (f64, f64),
    pub weight_range: (f64, f64),
    pub od_cutoff: f64,
    /// Side length of one cell in distance units; only affects coordinates.
    pub cell_size: f64,
    /// Signalization cost b_i of every high-stress node.
    pub signal_cost: f64,
    pub crossing_rule: CrossingRule,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            cells: 6,
            minor_per_segment: 3,
            signal_prob: 0.3,
            centroids: 72,
            connect_prob: 0.7,
            time_range: (1.0, 5.0),
            weight_range: (1.0, 10.0),
            od_cutoff: 60.0,
            cell_size: 12.0,
            signal_cost: 10.0,
            crossing_rule: CrossingRule::AllOutgoing,
        }
    }
}

impl GridParams {
    pub fn with_cells(cells: usize) -> Self {
        GridParams {
            cells,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let bad = |m: &str| Err(InstanceError::InvalidParams(m.to_string()));
        if self.cells == 0 {
            return bad("cells must be positive");
        }
        if !(0.0..=1.0).contains(&self.signal_prob) || !(0.0..=1.0).contains(&self.connect_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        let (t0, t1) = self.time_range;
        if !(t0 > 0.0 && t1 >= t0) {
            return bad("travel-time range must be positive and ordered");
        }
        let (w0, w1) = self.weight_range;
        if !(w0 > 0.0 && w1 >= w0) {
            return bad("weight range must be positive and ordered");
        }
        if !(self.od_cutoff > 0.0) || !(self.cell_size > 0.0) || !(self.signal_cost >= 0.0) {
            return bad("cutoff and cell size must be positive, signal cost nonnegative");
        }
        Ok(())
    }

    pub fn n_intersections(&self) -> usize {
        (self.cells + 1) * (self.cells + 1)
    }

    pub fn n_segments(&self) -> usize {
        2 * self.cells * (self.cells + 1)
    }
}

/// Builds a synthetic grid instance. Pure function of `(seed, params)`.
///
/// Node layout: arterial intersections first (row-major), then the minor
/// intersections of each segment in segment order, then the centroids.
/// Segments are numbered horizontal first (row-major), then vertical; the
/// segment number is the project id.
pub fn generate_synthetic(seed: u64, params: &GridParams) -> Result<Network, InstanceError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = params.cells;
    let side = c + 1;
    let minor = params.minor_per_segment;
    let mut nodes = Vec::new();
    for r in 0..side {
        for col in 0..side {
            nodes.push(Node {
                id: nodes.len(),
                coords: [col as f64 * params.cell_size, r as f64 * params.cell_size],
                stress: Stress::Low,
                is_centroid: false,
            });
        }
    }
    let inter = |r: usize, col: usize| r * side + col;

    // (start intersection, end intersection) per segment
    let mut segments = Vec::with_capacity(params.n_segments());
    for r in 0..side {
        for col in 0..c {
            segments.push((inter(r, col), inter(r, col + 1)));
        }
    }
    for r in 0..c {
        for col in 0..side {
            segments.push((inter(r, col), inter(r + 1, col)));
        }
    }

    let mut segment_minor: Vec<Vec<usize>> = Vec::with_capacity(segments.len());
    for &(a, b) in &segments {
        let pa = nodes[a].coords;
        let pb = nodes[b].coords;
        let mut ids = Vec::with_capacity(minor);
        for m in 1..=minor {
            let f = m as f64 / (minor + 1) as f64;
            let signalized = rng.gen::<f64>() < params.signal_prob;
            ids.push(nodes.len());
            nodes.push(Node {
                id: nodes.len(),
                coords: [pa[0] + f * (pb[0] - pa[0]), pa[1] + f * (pb[1] - pa[1])],
                stress: if signalized {
                    Stress::Low
                } else {
                    Stress::High
                },
                is_centroid: false,
            });
        }
        segment_minor.push(ids);
    }

    let (t_lo, t_hi) = params.time_range;
    let draw_time = |rng: &mut ChaCha8Rng| round3(rng.gen_range(t_lo..=t_hi));
    let mut edges: Vec<Edge> = Vec::new();
    let mut projects = Vec::with_capacity(segments.len());
    for (sid, &(a, b)) in segments.iter().enumerate() {
        let mut chain = vec![a];
        chain.extend_from_slice(&segment_minor[sid]);
        chain.push(b);
        let mut edge_ids = Vec::new();
        let mut cost = 0.0;
        for w in chain.windows(2) {
            for (tail, head) in [(w[0], w[1]), (w[1], w[0])] {
                let t = draw_time(&mut rng);
                edge_ids.push(edges.len());
                cost += t;
                edges.push(Edge {
                    id: edges.len(),
                    tail,
                    head,
                    travel_time: t,
                    stress: Stress::High,
                    edge_cost: t,
                    project_id: Some(sid),
                });
            }
        }
        projects.push(Project {
            id: sid,
            edge_ids,
            cost,
        });
    }

    // Cell (r, col) is bounded by horizontal segments r and r+1 and vertical
    // segments col and col+1.
    let n_horizontal = side * c;
    let cell_segments = |r: usize, col: usize| {
        [
            r * c + col,
            (r + 1) * c + col,
            n_horizontal + r * side + col,
            n_horizontal + r * side + col + 1,
        ]
    };
    let n_cells = c * c;
    for k in 0..params.centroids {
        let cell = k % n_cells;
        let (r, col) = (cell / c, cell % c);
        let fx = rng.gen_range(0.1..0.9);
        let fy = rng.gen_range(0.1..0.9);
        let cid = nodes.len();
        nodes.push(Node {
            id: cid,
            coords: [
                (col as f64 + fx) * params.cell_size,
                (r as f64 + fy) * params.cell_size,
            ],
            stress: Stress::Low,
            is_centroid: true,
        });
        let around: Vec<usize> = cell_segments(r, col)
            .iter()
            .flat_map(|&sid| segment_minor[sid].iter().copied())
            .collect();
        let n_connect = (params.connect_prob * around.len() as f64).round() as usize;
        let mut chosen = rand::seq::index::sample(&mut rng, around.len(), n_connect).into_vec();
        chosen.sort_unstable();
        for m in chosen.into_iter().map(|i| around[i]) {
            {
                {
                    for (tail, head) in [(cid, m), (m, cid)] {
                        let t = draw_time(&mut rng);
                        edges.push(Edge {
                            id: edges.len(),
                            tail,
                            head,
                            travel_time: t,
                            stress: Stress::Low,
                            edge_cost: 0.0,
                            project_id: None,
                        });
                    }
                }
            }
        }
    }

    let node_costs: Vec<NodeCost> = nodes
        .iter()
        .filter(|n| n.stress == Stress::High)
        .map(|n| NodeCost {
            node: n.id,
            cost: params.signal_cost,
        })
        .collect();

    // OD pairs need full-network shortest times; build a provisional network.
    let provisional = Network::new(
        nodes,
        edges,
        node_costs,
        projects,
        Vec::new(),
        params.crossing_rule,
    )?;
    let centroids: Vec<usize> = provisional
        .nodes
        .iter()
        .filter(|n| n.is_centroid)
        .map(|n| n.id)
        .collect();
    let all = vec![true; provisional.edges.len()];
    let (w_lo, w_hi) = params.weight_range;
    let mut od_pairs = Vec::new();
    for &o in &centroids {
        let dist = crate::routing::dijkstra_all(&provisional, &all, o, params.od_cutoff);
        for &d in &centroids {
            if d != o && dist[d] < params.od_cutoff {
                od_pairs.push(OdPair {
                    id: od_pairs.len(),
                    origin: o,
                    destination: d,
                    weight: round3(rng.gen_range(w_lo..=w_hi)),
                });
            }
        }
    }
    let Network {
        nodes,
        edges,
        node_costs,
        projects,
        ..
    } = provisional;
    Network::new(
        nodes,
        edges,
        node_costs,
        projects,
        od_pairs,
        params.crossing_rule,
    )
}

/// Distinct projects among the high-stress edges incident to `node`.
pub fn incident_projects(network: &Network, node: usize) -> BTreeSet<usize> {
    let adj = network.adjacency();
    adj.outgoing(node)
        .iter()
        .chain(adj.incoming(node))
        .filter_map(|&e| network.edges[e].project_id)
        .collect()
}
