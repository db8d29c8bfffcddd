//! Follower cost oracle: low-stress shortest paths under a leader design and
//! the piecewise-linear accessibility measure.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::{CrossingRule, Network, Stress};
use crate::util::KahanSum;

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("negative travel time {0}")]
    NegativeTime(f64),
    #[error("invalid impedance: {0}")]
    InvalidImpedance(String),
    #[error("unknown impedance preset {0:?} (expected exp, lin or rec)")]
    UnknownPreset(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
}

/// Leader decision: selected projects `x` and signalized nodes `z`.
///
/// `nodes` is indexed by node id; entries for low-stress nodes must be false.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Design {
    pub projects: Vec<bool>,
    pub nodes: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub edge: f64,
    pub node: f64,
}

impl Budget {
    pub fn edge_only(edge: f64) -> Self {
        Budget { edge, node: 0.0 }
    }
}

#[derive(Serialize, Deserialize)]
struct DesignFile {
    projects: Vec<usize>,
    #[serde(default)]
    nodes: Vec<usize>,
}

impl Design {
    pub fn empty(network: &Network) -> Self {
        Design {
            projects: vec![false; network.n_projects()],
            nodes: vec![false; network.n_nodes()],
        }
    }

    pub fn full(network: &Network) -> Self {
        Design {
            projects: vec![true; network.n_projects()],
            nodes: network
                .nodes
                .iter()
                .map(|n| n.stress == Stress::High)
                .collect(),
        }
    }

    pub fn from_lists(
        network: &Network,
        projects: &[usize],
        nodes: &[usize],
    ) -> Result<Self, RoutingError> {
        let mut d = Design::empty(network);
        for &p in projects {
            if p >= d.projects.len() {
                return Err(RoutingError::InvalidDesign(format!("unknown project {p}")));
            }
            d.projects[p] = true;
        }
        for &n in nodes {
            if network.signal_cost(n).is_none() {
                return Err(RoutingError::InvalidDesign(format!(
                    "node {n} is not a high-stress node"
                )));
            }
            d.nodes[n] = true;
        }
        Ok(d)
    }

    pub fn selected_projects(&self) -> Vec<usize> {
        (0..self.projects.len())
            .filter(|&p| self.projects[p])
            .collect()
    }

    pub fn selected_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&n| self.nodes[n]).collect()
    }

    pub fn n_selected(&self) -> usize {
        self.projects.iter().filter(|&&b| b).count()
    }

    pub fn edge_cost(&self, network: &Network) -> f64 {
        crate::util::sum(
            self.selected_projects()
                .into_iter()
                .map(|p| network.projects[p].cost),
        )
    }

    pub fn node_cost(&self, network: &Network) -> f64 {
        crate::util::sum(
            self.selected_nodes()
                .into_iter()
                .map(|n| network.signal_cost(n).unwrap_or(0.0)),
        )
    }

    pub fn is_feasible(&self, network: &Network, budget: &Budget) -> bool {
        self.edge_cost(network) <= budget.edge + 1e-9
            && self.node_cost(network) <= budget.node + 1e-9
    }

    /// Componentwise `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Design) -> bool {
        self.projects
            .iter()
            .zip(&other.projects)
            .all(|(a, b)| !a || *b)
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| !a || *b)
    }

    pub fn with_project(&self, p: usize) -> Design {
        let mut d = self.clone();
        d.projects[p] = true;
        d
    }

    pub fn to_json(&self) -> String {
        let f = DesignFile {
            projects: self.selected_projects(),
            nodes: self.selected_nodes(),
        };
        let mut s = serde_json::to_string_pretty(&f).expect("design serializes");
        s.push('\n');
        s
    }

    pub fn from_json(network: &Network, text: &str) -> Result<Self, RoutingError> {
        let f: DesignFile =
            serde_json::from_str(text).map_err(|e| RoutingError::InvalidDesign(e.to_string()))?;
        Design::from_lists(network, &f.projects, &f.nodes)
    }
}

/// Piecewise-linear impedance with slopes `beta1`, `beta2` and breakpoints
/// `t1 <= t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSpec {
    pub beta1: f64,
    pub beta2: f64,
    pub t1: f64,
    pub t2: f64,
}

impl ImpedanceSpec {
    pub fn new(beta1: f64, beta2: f64, t1: f64, t2: f64) -> Result<Self, RoutingError> {
        let spec = ImpedanceSpec {
            beta1,
            beta2,
            t1,
            t2,
        };
        if !(beta1 >= 0.0 && beta2 >= 0.0) {
            return Err(RoutingError::InvalidImpedance(
                "slopes must be nonnegative".into(),
            ));
        }
        if !(0.0 <= t1 && t1 <= t2 && t2.is_finite()) {
            return Err(RoutingError::InvalidImpedance(
                "need 0 <= T1 <= T2 < inf".into(),
            ));
        }
        if spec.g(t1) < -1e-12 {
            return Err(RoutingError::InvalidImpedance(
                "impedance negative before T1".into(),
            ));
        }
        Ok(spec)
    }

    /// Modified exponential approximation.
    pub fn exp() -> Self {
        ImpedanceSpec {
            beta1: 0.0375,
            beta2: 0.00625,
            t1: 20.0,
            t2: 60.0,
        }
    }

    pub fn lin() -> Self {
        ImpedanceSpec {
            beta1: 1.0 / 60.0,
            beta2: 0.0,
            t1: 60.0,
            t2: 60.0,
        }
    }

    /// Smoothed rectangular (cumulative-opportunity) measure.
    pub fn rec() -> Self {
        ImpedanceSpec {
            beta1: 0.001,
            beta2: 0.471,
            t1: 58.0,
            t2: 60.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self, RoutingError> {
        match name.to_ascii_lowercase().as_str() {
            "exp" => Ok(Self::exp()),
            "lin" => Ok(Self::lin()),
            "rec" => Ok(Self::rec()),
            _ => Err(RoutingError::UnknownPreset(name.to_string())),
        }
    }

    /// Intercepts of the two linear pieces.
    pub fn alphas(&self) -> (f64, f64) {
        (1.0, 1.0 + (self.beta2 - self.beta1) * self.t1)
    }

    /// Concave in travel time iff the first slope is not steeper; a
    /// preset whose second piece is empty (`t1 == t2`) is linear on
    /// `[0, t2)` and counts as concave.
    pub fn is_concave(&self) -> bool {
        self.beta1 <= self.beta2 || self.t1 >= self.t2
    }

    /// Impedance value for a nonnegative travel time.
    pub fn g(&self, tau: f64) -> f64 {
        if tau < self.t1 {
            1.0 - self.beta1 * tau
        } else if tau < self.t2 {
            1.0 - self.beta1 * self.t1 - self.beta2 * (tau - self.t1)
        } else {
            0.0
        }
    }

    pub fn accessibility(&self, tau: f64) -> Result<f64, RoutingError> {
        if tau < 0.0 || tau.is_nan() {
            return Err(RoutingError::NegativeTime(tau));
        }
        Ok(self.g(tau))
    }
}

/// Edge mask of traversable edges under `design`.
pub fn traversable(network: &Network, design: &Design) -> Vec<bool> {
    let adj = network.adjacency();
    let crossable: Vec<bool> = network
        .nodes
        .iter()
        .map(|n| {
            if n.stress == Stress::Low || design.nodes[n.id] {
                return true;
            }
            adj.outgoing(n.id)
                .iter()
                .chain(adj.incoming(n.id))
                .all(|&e| match network.edges[e].project_id {
                    Some(p) => design.projects[p],
                    None => true,
                })
        })
        .collect();
    network
        .edges
        .iter()
        .map(|e| {
            let built = match e.project_id {
                Some(p) => design.projects[p],
                None => true,
            };
            if !built {
                return false;
            }
            let blocked_here = match network.crossing_rule {
                CrossingRule::HighStressOutgoing => e.stress == Stress::High,
                CrossingRule::AllOutgoing => true,
            };
            !(blocked_here && !crossable[e.tail])
        })
        .collect()
}

#[derive(Clone, Copy)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Single-source shortest times over edges with `mask[e]`; nodes at or
/// beyond `cutoff` are left at infinity.
pub fn dijkstra_all(network: &Network, mask: &[bool], source: usize, cutoff: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; network.n_nodes()];
    let mut done = vec![false; network.n_nodes()];
    run_dijkstra(network, mask, source, cutoff, &mut dist, &mut done, |_| {
        false
    });
    for (d, s) in dist.iter_mut().zip(&done) {
        if !*s {
            *d = f64::INFINITY;
        }
    }
    dist
}

/// Core loop; `on_settle` returns true to stop early.
fn run_dijkstra(
    network: &Network,
    mask: &[bool],
    source: usize,
    cutoff: f64,
    dist: &mut [f64],
    done: &mut [bool],
    mut on_settle: impl FnMut(usize) -> bool,
) {
    let adj = network.adjacency();
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapItem { dist: d, node: u }) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        if d >= cutoff {
            break;
        }
        done[u] = true;
        if on_settle(u) {
            break;
        }
        for &e in adj.outgoing(u) {
            if !mask[e] {
                continue;
            }
            let edge = &network.edges[e];
            let nd = d + edge.travel_time;
            if nd < dist[edge.head] {
                dist[edge.head] = nd;
                heap.push(HeapItem {
                    dist: nd,
                    node: edge.head,
                });
            }
        }
    }
}

/// Batched follower-time evaluation for a fixed follower subset; OD pairs
/// are grouped by origin so one search serves every destination.
#[derive(Debug, Clone)]
pub struct FollowerOracle {
    groups: Vec<(usize, Vec<(usize, usize)>)>,
    len: usize,
    t2: f64,
}

impl FollowerOracle {
    pub fn new(network: &Network, subset: &[usize], t2: f64) -> Self {
        let mut by_origin: std::collections::BTreeMap<usize, Vec<(usize, usize)>> =
            Default::default();
        for (pos, &od) in subset.iter().enumerate() {
            let pair = &network.od_pairs[od];
            by_origin
                .entry(pair.origin)
                .or_default()
                .push((pair.destination, pos));
        }
        FollowerOracle {
            groups: by_origin.into_iter().collect(),
            len: subset.len(),
            t2,
        }
    }

    pub fn all(network: &Network, t2: f64) -> Self {
        let subset: Vec<usize> = (0..network.n_followers()).collect();
        Self::new(network, &subset, t2)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// τ for each follower of the subset, in subset order.
    pub fn times_masked(&self, network: &Network, mask: &[bool]) -> Vec<f64> {
        let mut tau = vec![self.t2; self.len];
        let n = network.n_nodes();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut want = vec![0u32; n];
        for (origin, targets) in &self.groups {
            dist.fill(f64::INFINITY);
            done.fill(false);
            let mut remaining = 0usize;
            for &(d, _) in targets {
                if want[d] == 0 {
                    remaining += 1;
                }
                want[d] += 1;
            }
            run_dijkstra(network, mask, *origin, self.t2, &mut dist, &mut done, |u| {
                if want[u] > 0 {
                    remaining -= 1;
                }
                remaining == 0
            });
            for &(d, pos) in targets {
                want[d] = 0;
                if done[d] {
                    tau[pos] = dist[d].min(self.t2);
                }
            }
        }
        tau
    }

    pub fn times(&self, network: &Network, design: &Design) -> Vec<f64> {
        self.times_masked(network, &traversable(network, design))
    }

    pub fn accessibilities(
        &self,
        network: &Network,
        design: &Design,
        impedance: &ImpedanceSpec,
    ) -> Vec<f64> {
        self.times(network, design)
            .into_iter()
            .map(|t| impedance.g(t))
            .collect()
    }
}

pub fn follower_time(
    network: &Network,
    design: &Design,
    od: usize,
    impedance: &ImpedanceSpec,
) -> f64 {
    FollowerOracle::new(network, &[od], impedance.t2).times(network, design)[0]
}

/// Σ weight · g(τ) over `subset`; `weights` is aligned with `subset`.
pub fn exact_objective(
    network: &Network,
    design: &Design,
    subset: &[usize],
    weights: &[f64],
    impedance: &ImpedanceSpec,
) -> f64 {
    let oracle = FollowerOracle::new(network, subset, impedance.t2);
    weighted_total(&oracle.accessibilities(network, design, impedance), weights)
}

/// Objective over all followers with their own weights.
pub fn total_accessibility(network: &Network, design: &Design, impedance: &ImpedanceSpec) -> f64 {
    let subset: Vec<usize> = (0..network.n_followers()).collect();
    exact_objective(network, design, &subset, &network.weights(), impedance)
}

pub fn weighted_total(values: &[f64], weights: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for (v, w) in values.iter().zip(weights) {
        acc.add(v * w);
    }
    acc.value()
}
