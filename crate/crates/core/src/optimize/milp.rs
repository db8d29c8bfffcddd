//! Single-level MILP export in CPLEX LP text format, and solution import.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ObjectiveSpec, OptimizeError, ReducedWeights, Variant};
use crate::netcore::{incident_projects, CrossingRule, Network, Stress};
use crate::routing::{Budget, Design, ImpedanceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// accessibility variable v under two linear caps (β1 ≤ β2)
    Concave,
    /// interval indicator r with split travel times u1, u2 (β1 > β2)
    Convex,
}

pub fn encoding_for(impedance: &ImpedanceSpec) -> Encoding {
    if impedance.beta1 <= impedance.beta2 {
        Encoding::Concave
    } else {
        Encoding::Convex
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilpStats {
    pub encoding: Encoding,
    pub n_variables: usize,
    pub n_binaries: usize,
    pub n_constraints: usize,
    pub n_routing: usize,
    pub n_flow_balance: usize,
    pub n_edge_design: usize,
    pub n_node_design: usize,
    pub n_impedance: usize,
}

/// Shortest times on the full network (every edge usable), forward from
/// `src` or backward into it.
fn full_times(network: &Network, src: usize, reverse: bool) -> Vec<f64> {
    let adj = network.adjacency();
    let mut dist = vec![f64::INFINITY; network.n_nodes()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((0u64, src)));
    while let Some(Reverse((bits, u))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[u] {
            continue;
        }
        let edges = if reverse { adj.incoming(u) } else { adj.outgoing(u) };
        for &e in edges {
            let edge = &network.edges[e];
            let v = if reverse { edge.tail } else { edge.head };
            let nd = d + edge.travel_time;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    dist
}

fn followers_and_weights(network: &Network, spec: &ObjectiveSpec) -> Result<(Vec<usize>, Vec<f64>), OptimizeError> {
    let q = network.weights();
    match spec.variant {
        Variant::Exact => Ok(((0..network.n_followers()).collect(), q)),
        Variant::Reduced => {
            let s = spec.sample.as_ref().ok_or(OptimizeError::MissingSample)?;
            let raw: Vec<f64> = s.members.iter().map(|&t| q[t]).collect();
            let w = match &spec.reduced_weights {
                ReducedWeights::Raw => raw,
                ReducedWeights::Renormalized => {
                    let total: f64 = q.iter().sum();
                    let part: f64 = raw.iter().sum();
                    raw.iter().map(|v| v * total / part).collect()
                }
                ReducedWeights::Custom(w) => w.clone(),
            };
            Ok((s.members.clone(), w))
        }
        _ => Err(OptimizeError::InvalidParam("MILP export supports the exact and reduced variants".into())),
    }
}

struct Lp {
    text: String,
}

impl Lp {
    fn terms(&mut self, terms: &[(f64, String)]) {
        if terms.is_empty() {
            self.text.push_str(" 0 obj_const");
        }
        for (i, (c, name)) in terms.iter().enumerate() {
            if i > 0 && i % 8 == 0 {
                self.text.push_str("\n  ");
            }
            let sign = if *c < 0.0 { "-" } else { "+" };
            let _ = write!(self.text, " {sign} {} {name}", c.abs());
        }
    }

    fn row(&mut self, name: &str, terms: &[(f64, String)], op: &str, rhs: f64) {
        let _ = write!(self.text, " {name}:");
        self.terms(terms);
        let _ = writeln!(self.text, " {op} {rhs}");
    }
}

/// Builds the LP-format model text for the exact or reduced variant.
/// Routing variables are generated only for edges that lie on some o-d walk
/// shorter than T2 on the full network.
pub fn build_milp(network: &Network, spec: &ObjectiveSpec, budget: &Budget) -> Result<(String, MilpStats), OptimizeError> {
    let (followers, weights) = followers_and_weights(network, spec)?;
    let imp = spec.impedance;
    let (alpha1, alpha2) = imp.alphas();
    let enc = encoding_for(&imp);
    let t2 = imp.t2;
    let high: Vec<usize> = network.high_stress_nodes();
    let incident: BTreeMap<usize, Vec<usize>> = high
        .iter()
        .map(|&i| (i, incident_projects(network, i).into_iter().collect()))
        .collect();

    let mut obj: Vec<(f64, String)> = Vec::new();
    let mut rows = Lp { text: String::new() };
    let mut bounds = String::new();
    let mut binaries: Vec<String> = Vec::new();
    let mut stats = MilpStats {
        encoding: enc,
        n_variables: 0,
        n_binaries: 0,
        n_constraints: 0,
        n_routing: 0,
        n_flow_balance: 0,
        n_edge_design: 0,
        n_node_design: 0,
        n_impedance: 0,
    };

    for p in 0..network.n_projects() {
        binaries.push(format!("x_{p}"));
    }
    for &i in &high {
        binaries.push(format!("z_{i}"));
    }
    stats.n_variables += binaries.len();

    let edge_row: Vec<(f64, String)> = network.projects.iter().map(|p| (p.cost, format!("x_{}", p.id))).collect();
    rows.row("budget_edge", &edge_row, "<=", budget.edge);
    stats.n_constraints += 1;
    if !high.is_empty() {
        let node_row: Vec<(f64, String)> = high
            .iter()
            .map(|&i| (network.signal_cost(i).unwrap_or(0.0), format!("z_{i}")))
            .collect();
        rows.row("budget_node", &node_row, "<=", budget.node);
        stats.n_constraints += 1;
    }

    let mut from_origin: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut to_dest: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut obj_const = 0.0;
    for (pos, &od_id) in followers.iter().enumerate() {
        let od = &network.od_pairs[od_id];
        let q = weights[pos];
        let (o, d) = (od.origin, od.destination);
        let fo = from_origin.entry(o).or_insert_with(|| full_times(network, o, false)).clone();
        let td = to_dest.entry(d).or_insert_with(|| full_times(network, d, true));
        let kept: Vec<usize> = network
            .edges
            .iter()
            .filter(|e| fo[e.tail] + e.travel_time + td[e.head] < t2)
            .map(|e| e.id)
            .collect();
        let y = |e: usize| format!("y_{od_id}_{e}");
        let dummy = format!("a_{od_id}");
        stats.n_routing += kept.len();
        stats.n_variables += kept.len() + 1;
        for &e in &kept {
            let _ = writeln!(bounds, " 0 <= {} <= 1", y(e));
        }
        let _ = writeln!(bounds, " 0 <= {dummy} <= 1");

        let mut balance: BTreeMap<usize, Vec<(f64, String)>> = BTreeMap::new();
        balance.entry(o).or_default();
        balance.entry(d).or_default();
        for &e in &kept {
            let edge = &network.edges[e];
            balance.entry(edge.tail).or_default().push((1.0, y(e)));
            balance.entry(edge.head).or_default().push((-1.0, y(e)));
        }
        balance.get_mut(&o).expect("origin row").push((1.0, dummy.clone()));
        balance.get_mut(&d).expect("destination row").push((-1.0, dummy.clone()));
        for (node, terms) in &balance {
            let rhs = if *node == o {
                1.0
            } else if *node == d {
                -1.0
            } else {
                0.0
            };
            rows.row(&format!("fb_{od_id}_{node}"), terms, "=", rhs);
            stats.n_flow_balance += 1;
        }

        for &e in &kept {
            let edge = &network.edges[e];
            if let Some(p) = edge.project_id {
                rows.row(&format!("ed_{od_id}_{e}"), &[(1.0, y(e)), (-1.0, format!("x_{p}"))], "<=", 0.0);
                stats.n_edge_design += 1;
            }
            let tail_high = network.nodes[edge.tail].stress == Stress::High;
            let blocked = match network.crossing_rule {
                CrossingRule::HighStressOutgoing => edge.stress == Stress::High,
                CrossingRule::AllOutgoing => true,
            };
            if tail_high && blocked {
                for &p in &incident[&edge.tail] {
                    rows.row(
                        &format!("nd_{od_id}_{e}_{p}"),
                        &[(1.0, y(e)), (-1.0, format!("x_{p}")), (-1.0, format!("z_{}", edge.tail))],
                        "<=",
                        0.0,
                    );
                    stats.n_node_design += 1;
                }
            }
        }

        let mut time: Vec<(f64, String)> = kept.iter().map(|&e| (network.edges[e].travel_time, y(e))).collect();
        time.push((t2, dummy.clone()));
        match enc {
            Encoding::Concave => {
                let v = format!("v_{od_id}");
                obj.push((q, v.clone()));
                for (tag, alpha, beta) in [("c1", alpha1, imp.beta1), ("c2", alpha2, imp.beta2)] {
                    let mut terms = vec![(1.0, v.clone())];
                    terms.extend(time.iter().map(|(t, n)| (beta * t, n.clone())));
                    rows.row(&format!("{tag}_{od_id}"), &terms, "<=", alpha);
                }
                stats.n_variables += 1;
                stats.n_impedance += 2;
            }
            Encoding::Convex => {
                let (r, u1, u2) = (format!("r_{od_id}"), format!("u1_{od_id}"), format!("u2_{od_id}"));
                obj.push((q * (alpha1 - alpha2), r.clone()));
                obj.push((-q * imp.beta1, u1.clone()));
                obj.push((-q * imp.beta2, u2.clone()));
                obj_const += q * alpha2;
                rows.row(&format!("i1_{od_id}"), &[(1.0, u1.clone()), (-imp.t1, r.clone())], "<=", 0.0);
                rows.row(&format!("i2_{od_id}"), &[(1.0, u2.clone()), (imp.t1, r.clone())], ">=", imp.t1);
                rows.row(&format!("i3_{od_id}"), &[(1.0, u2.clone()), (t2, r.clone())], "<=", t2);
                let mut terms = vec![(1.0, u1), (1.0, u2)];
                terms.extend(time.iter().map(|(t, n)| (-t, n.clone())));
                rows.row(&format!("i4_{od_id}"), &terms, "=", 0.0);
                binaries.push(r);
                stats.n_variables += 3;
                stats.n_impedance += 4;
            }
        }
    }
    if enc == Encoding::Convex {
        obj.push((obj_const, "obj_const".into()));
        let _ = writeln!(bounds, " obj_const = 1");
        stats.n_variables += 1;
    }
    stats.n_binaries = binaries.len();
    stats.n_constraints += stats.n_flow_balance + stats.n_edge_design + stats.n_node_design + stats.n_impedance;

    let mut out = Lp { text: String::new() };
    let _ = writeln!(out.text, "\\ accessibility network design, {} followers, {:?} encoding", followers.len(), enc);
    out.text.push_str("Maximize\n obj:");
    out.terms(&obj);
    out.text.push_str("\nSubject To\n");
    out.text.push_str(&rows.text);
    out.text.push_str("Bounds\n");
    out.text.push_str(&bounds);
    out.text.push_str("Binaries\n");
    for chunk in binaries.chunks(10) {
        let _ = writeln!(out.text, " {}", chunk.join(" "));
    }
    out.text.push_str("End\n");
    Ok((out.text, stats))
}

pub fn export_milp(network: &Network, spec: &ObjectiveSpec, budget: &Budget, path: &Path) -> Result<MilpStats, OptimizeError> {
    let (text, stats) = build_milp(network, spec, budget)?;
    std::fs::write(path, text)?;
    Ok(stats)
}

/// Reads the project and node variables from a solver solution file.
/// Accepts `name value`, `name = value`, and column-listing lines whose
/// value follows the name; other lines are ignored.
pub fn parse_solution(network: &Network, text: &str) -> Result<Design, OptimizeError> {
    let mut design = Design::empty(network);
    let mut seen = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('\\') {
            continue;
        }
        let tokens: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == '=').filter(|t| !t.is_empty()).collect();
        for (i, tok) in tokens.iter().enumerate() {
            let (kind, idx) = match tok.split_once('_') {
                Some((k @ ("x" | "z"), rest)) => match rest.parse::<usize>() {
                    Ok(idx) => (k, idx),
                    Err(_) => continue,
                },
                _ => continue,
            };
            let value: f64 = tokens
                .get(i + 1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| OptimizeError::Solution(format!("no value after {tok}")))?;
            let on = value > 0.5;
            if kind == "x" {
                if idx >= network.n_projects() {
                    return Err(OptimizeError::Solution(format!("unknown project {idx}")));
                }
                design.projects[idx] = on;
            } else {
                if idx >= network.n_nodes() || network.nodes[idx].stress != Stress::High {
                    return Err(OptimizeError::Solution(format!("node {idx} is not a high-stress node")));
                }
                design.nodes[idx] = on;
            }
            seen = true;
            break;
        }
    }
    if !seen {
        return Err(OptimizeError::Solution("no design variables found".into()));
    }
    Ok(design)
}

pub fn import_solution(network: &Network, path: &Path) -> Result<Design, OptimizeError> {
    parse_solution(network, &std::fs::read_to_string(path)?)
}

/// Design variables in `name value` form, usable as a warm start.
pub fn write_warm_start(network: &Network, design: &Design) -> String {
    let mut out = String::new();
    for p in 0..network.n_projects() {
        let _ = writeln!(out, "x_{p} {}", u8::from(design.projects[p]));
    }
    for i in network.high_stress_nodes() {
        let _ = writeln!(out, "z_{i} {}", u8::from(design.nodes[i]));
    }
    out
}
