//! Master-problem objectives, solvers and the sampling-based solution
//! methods built on them. Orientation is maximization throughout.

mod bounds;
mod milp;

pub use bounds::{
    concentration_term, estimate_mu, knn_bound, q_bar, reg_bound, BoundParams, KnnBound, RegBound,
};
pub use milp::{
    build_milp, encoding_for, export_milp, import_solution, parse_solution, write_warm_start,
    Encoding, MilpStats,
};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{sample_feasible_designs, FollowerFeatures};
use crate::lpcore::{solve_lp, DenseLp, LpError, LpOutcome, Sense};
use crate::netcore::Network;
use crate::routing::{traversable, Budget, Design, FollowerOracle, ImpedanceSpec};
use crate::sampler::{
    assignment_weights, p_center_sample, uniform_sample, vap_median_sample, Method, Sample,
    SamplerError, VapParams,
};
use crate::util::{cmp_dist_id, euclidean, median, mix_seed};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("objective variant requires a follower sample")]
    MissingSample,
    #[error("objective variant requires follower features")]
    MissingFeatures,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("inner fit infeasible under loss bound {0}")]
    InnerInfeasible(f64),
    #[error("inner fit unbounded; give a finite l1 radius or loss bound")]
    InnerUnbounded,
    #[error("more than {limit} feasible project subsets")]
    TooManySubsets { limit: usize },
    #[error("no feasible design with a feasible inner fit")]
    NoFeasibleDesign,
    #[error("malformed solution file: {0}")]
    Solution(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    Exact,
    Reduced,
    KnnAug { k: usize },
    RegAug { l_bar: f64, lambda_reg: f64 },
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Exact => "exact",
            Variant::Reduced => "reduced",
            Variant::KnnAug { .. } => "knn",
            Variant::RegAug { .. } => "reg",
        }
    }
}

/// Weights r_t of the reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedWeights {
    /// q_t · Σ_S q / Σ_T q
    Renormalized,
    Raw,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub variant: Variant,
    pub sample: Option<Sample>,
    pub features: Option<FollowerFeatures>,
    pub impedance: ImpedanceSpec,
    pub reduced_weights: ReducedWeights,
    /// weight every follower term of the regression-augmented objective by
    /// q; `false` gives the unweighted sums
    pub q_weighted: bool,
}

impl ObjectiveSpec {
    pub fn exact(impedance: ImpedanceSpec) -> Self {
        ObjectiveSpec {
            variant: Variant::Exact,
            sample: None,
            features: None,
            impedance,
            reduced_weights: ReducedWeights::Renormalized,
            q_weighted: true,
        }
    }

    pub fn reduced(impedance: ImpedanceSpec, sample: Sample) -> Self {
        ObjectiveSpec {
            variant: Variant::Reduced,
            sample: Some(sample),
            ..Self::exact(impedance)
        }
    }

    pub fn knn_aug(impedance: ImpedanceSpec, sample: Sample, features: FollowerFeatures, k: usize) -> Self {
        ObjectiveSpec {
            variant: Variant::KnnAug { k },
            sample: Some(sample),
            features: Some(features),
            ..Self::exact(impedance)
        }
    }

    pub fn reg_aug(
        impedance: ImpedanceSpec,
        sample: Sample,
        features: FollowerFeatures,
        l_bar: f64,
        lambda_reg: f64,
    ) -> Self {
        ObjectiveSpec {
            variant: Variant::RegAug { l_bar, lambda_reg },
            sample: Some(sample),
            features: Some(features),
            ..Self::exact(impedance)
        }
    }
}

/// Linear-model fit embedded in the regression-augmented objective.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFit {
    pub w: Vec<f64>,
    /// Σ m_t |g_t − wᵀf_t|
    pub loss: f64,
    /// Σ_{s∉T} c_s wᵀf_s
    pub objective: f64,
}

/// Solves `max cᵀw  s.t.  Σ m_t |g_t − wᵀf_t| ≤ l_bar,  ‖w‖₁ ≤ lambda_reg`
/// where `c` is the (weighted) feature sum of the outside followers.
/// Infinite bounds drop the corresponding row.
pub fn inner_fit_raw(
    member_features: &[Vec<f64>],
    targets: &[f64],
    m: &[f64],
    c: &[f64],
    l_bar: f64,
    lambda_reg: f64,
) -> Result<InnerFit, OptimizeError> {
    if !(l_bar >= 0.0) {
        return Err(OptimizeError::InvalidParam(format!("loss bound {l_bar} must be nonnegative")));
    }
    if !(lambda_reg >= 0.0) {
        return Err(OptimizeError::InvalidParam(format!("l1 radius {lambda_reg} must be nonnegative")));
    }
    let dim = c.len();
    let active: Vec<usize> = (0..targets.len()).filter(|&t| m[t] > 0.0).collect();
    let nv = 2 * dim + active.len();
    let mut obj = vec![0.0; nv];
    for k in 0..dim {
        obj[k] = c[k];
        obj[dim + k] = -c[k];
    }
    let mut lp = DenseLp::new(Sense::Maximize, obj);
    if l_bar.is_finite() {
        for (j, &t) in active.iter().enumerate() {
            let f = &member_features[t];
            let mut up = vec![0.0; nv];
            let mut dn = vec![0.0; nv];
            for k in 0..dim {
                up[k] = f[k];
                up[dim + k] = -f[k];
                dn[k] = -f[k];
                dn[dim + k] = f[k];
            }
            up[2 * dim + j] = -1.0;
            dn[2 * dim + j] = -1.0;
            lp.add_le(up, targets[t]);
            lp.add_le(dn, -targets[t]);
        }
        let mut row = vec![0.0; nv];
        for (j, &t) in active.iter().enumerate() {
            row[2 * dim + j] = m[t];
        }
        lp.add_le(row, l_bar);
    }
    if lambda_reg.is_finite() {
        let mut row = vec![0.0; nv];
        row[..2 * dim].iter_mut().for_each(|v| *v = 1.0);
        lp.add_le(row, lambda_reg);
    }
    match solve_lp(&lp, 1e-9)? {
        LpOutcome::Optimal { x, objective } => {
            let w: Vec<f64> = (0..dim).map(|k| x[k] - x[dim + k]).collect();
            let loss = (0..targets.len())
                .map(|t| m[t] * (targets[t] - dot(&w, &member_features[t])).abs())
                .sum();
            Ok(InnerFit { w, loss, objective })
        }
        LpOutcome::Infeasible => Err(OptimizeError::InnerInfeasible(l_bar)),
        LpOutcome::Unbounded => Err(OptimizeError::InnerUnbounded),
    }
}

/// [`inner_fit_raw`] with m_t and c derived from a k = 1 sample.
pub fn inner_fit(
    sample: &Sample,
    features: &FollowerFeatures,
    targets: &[f64],
    q: &[f64],
    l_bar: f64,
    lambda_reg: f64,
    q_weighted: bool,
) -> Result<InnerFit, OptimizeError> {
    let reg = RegData::new(sample, features, q, l_bar, lambda_reg, q_weighted);
    inner_fit_raw(&reg.member_features, targets, &reg.m, &reg.c, l_bar, lambda_reg)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
struct RegData {
    member_features: Vec<Vec<f64>>,
    m: Vec<f64>,
    c: Vec<f64>,
    l_bar: f64,
    lambda_reg: f64,
}

impl RegData {
    fn new(sample: &Sample, features: &FollowerFeatures, q: &[f64], l_bar: f64, lambda_reg: f64, q_weighted: bool) -> Self {
        let member = sample.is_member();
        let mut c = vec![0.0; features.dim];
        for s in (0..features.len()).filter(|&s| !member[s]) {
            let w = if q_weighted { q[s] } else { 1.0 };
            for (ck, fk) in c.iter_mut().zip(features.get(s)) {
                *ck += w * fk;
            }
        }
        let m = if sample.k == 1 {
            sample.multiplicity.iter().map(|&v| v as f64).collect()
        } else {
            let pos = sample.positions();
            let mut m = vec![0.0; sample.p()];
            for near in &sample.assignment {
                if let Some(&t) = near.first() {
                    m[pos[t].expect("member")] += 1.0;
                }
            }
            m
        };
        RegData {
            member_features: sample.members.iter().map(|&t| features.get(t).to_vec()).collect(),
            m,
            c,
            l_bar,
            lambda_reg,
        }
    }
}

/// Precomputed evaluator of one objective specification.
pub struct Evaluator<'a> {
    network: &'a Network,
    oracle: FollowerOracle,
    weights: Vec<f64>,
    impedance: ImpedanceSpec,
    reg: Option<RegData>,
}

impl<'a> Evaluator<'a> {
    pub fn new(network: &'a Network, spec: &ObjectiveSpec) -> Result<Self, OptimizeError> {
        let q = network.weights();
        let imp = spec.impedance;
        if spec.variant == Variant::Exact {
            return Ok(Evaluator {
                network,
                oracle: FollowerOracle::all(network, imp.t2),
                weights: q,
                impedance: imp,
                reg: None,
            });
        }
        let sample = spec.sample.as_ref().ok_or(OptimizeError::MissingSample)?;
        let oracle = FollowerOracle::new(network, &sample.members, imp.t2);
        let (weights, reg) = match spec.variant {
            Variant::Exact => unreachable!(),
            Variant::Reduced => {
                let raw: Vec<f64> = sample.members.iter().map(|&t| q[t]).collect();
                let w = match &spec.reduced_weights {
                    ReducedWeights::Raw => raw,
                    ReducedWeights::Renormalized => {
                        let total: f64 = q.iter().sum();
                        let part: f64 = raw.iter().sum();
                        raw.iter().map(|v| v * total / part).collect()
                    }
                    ReducedWeights::Custom(w) => {
                        if w.len() != sample.p() {
                            return Err(OptimizeError::InvalidParam("custom weights must align with the sample".into()));
                        }
                        w.clone()
                    }
                };
                (w, None)
            }
            Variant::KnnAug { k } => {
                if k == 0 || k > sample.p() {
                    return Err(OptimizeError::InvalidParam(format!("k = {k} outside 1..={}", sample.p())));
                }
                let w = if sample.k == k {
                    assignment_weights(sample, &q)
                } else {
                    let f = spec.features.as_ref().ok_or(OptimizeError::MissingFeatures)?;
                    assignment_weights(&sample.with_k(f, k)?, &q)
                };
                (w, None)
            }
            Variant::RegAug { l_bar, lambda_reg } => {
                if !(l_bar >= 0.0) {
                    return Err(OptimizeError::InvalidParam(format!("loss bound {l_bar} must be nonnegative")));
                }
                let f = spec.features.as_ref().ok_or(OptimizeError::MissingFeatures)?;
                let w = if spec.q_weighted {
                    sample.members.iter().map(|&t| q[t]).collect()
                } else {
                    vec![1.0; sample.p()]
                };
                (w, Some(RegData::new(sample, f, &q, l_bar, lambda_reg, spec.q_weighted)))
            }
        };
        Ok(Evaluator {
            network,
            oracle,
            weights,
            impedance: imp,
            reg,
        })
    }

    pub fn network(&self) -> &Network {
        self.network
    }

    /// Accessibilities of the evaluated followers.
    pub fn targets(&self, design: &Design) -> Vec<f64> {
        self.oracle
            .times_masked(self.network, &traversable(self.network, design))
            .into_iter()
            .map(|t| self.impedance.g(t))
            .collect()
    }

    pub fn value(&self, design: &Design) -> Result<f64, OptimizeError> {
        let g = self.targets(design);
        let base: f64 = g.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        match &self.reg {
            None => Ok(base),
            Some(r) => {
                let fit = inner_fit_raw(&r.member_features, &g, &r.m, &r.c, r.l_bar, r.lambda_reg)?;
                Ok(base + fit.objective)
            }
        }
    }

    /// Like [`Evaluator::value`], with infeasible inner fits mapped to −∞.
    pub fn value_or_neg_inf(&self, design: &Design) -> f64 {
        self.value(design).unwrap_or(f64::NEG_INFINITY)
    }
}

pub fn objective_value(spec: &ObjectiveSpec, design: &Design, network: &Network) -> Result<f64, OptimizeError> {
    Evaluator::new(network, spec)?.value(design)
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub design: Design,
    /// value under the solved variant
    pub objective: f64,
    /// full-follower total accessibility
    pub exact_objective: f64,
    pub wall_time: f64,
    /// accepted objective values, one list per restart
    pub trace: Vec<Vec<f64>>,
}

fn improves(new: f64, old: f64) -> bool {
    if old == f64::NEG_INFINITY {
        return new > old;
    }
    new > old + 1e-12 * old.abs().max(1.0)
}

fn affordable(extra: f64, spent: f64, budget: &Budget) -> bool {
    spent + extra <= budget.edge + 1e-9
}

fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Greedy construction by marginal gain per unit cost.
fn greedy_per_cost(eval: &Evaluator<'_>, budget: &Budget, trace: &mut Vec<f64>) -> (Design, f64) {
    let net = eval.network();
    let mut d = Design::empty(net);
    let mut f = eval.value_or_neg_inf(&d);
    trace.push(f);
    loop {
        let spent = d.edge_cost(net);
        let cands: Vec<usize> = (0..net.n_projects())
            .filter(|&p| !d.projects[p] && affordable(net.projects[p].cost, spent, budget))
            .collect();
        let vals: Vec<f64> = cands.par_iter().map(|&p| eval.value_or_neg_inf(&d.with_project(p))).collect();
        let ratios: Vec<f64> = cands
            .iter()
            .zip(&vals)
            .map(|(&p, &v)| {
                if improves(v, f) {
                    (v - f) / net.projects[p].cost.max(1e-12)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        match argmax_first(&ratios) {
            Some(i) if ratios[i] > f64::NEG_INFINITY => {
                d = d.with_project(cands[i]);
                f = vals[i];
                trace.push(f);
            }
            _ => break,
        }
    }
    (d, f)
}

fn random_maximal(net: &Network, budget: &Budget, rng: &mut ChaCha8Rng) -> Design {
    let mut order: Vec<usize> = (0..net.n_projects()).collect();
    order.shuffle(rng);
    let mut d = Design::empty(net);
    let mut spent = 0.0;
    for p in order {
        if affordable(net.projects[p].cost, spent, budget) {
            d.projects[p] = true;
            spent += net.projects[p].cost;
        }
    }
    d
}

#[derive(Clone, Copy)]
enum Move {
    Add(usize),
    Drop(usize),
    Swap(usize, usize),
}

fn apply(d: &Design, mv: Move) -> Design {
    let mut out = d.clone();
    match mv {
        Move::Add(a) => out.projects[a] = true,
        Move::Drop(r) => out.projects[r] = false,
        Move::Swap(r, a) => {
            out.projects[r] = false;
            out.projects[a] = true;
        }
    }
    out
}

/// Best-improvement descent over add, drop and swap moves.
fn improve(eval: &Evaluator<'_>, budget: &Budget, mut d: Design, mut f: f64, trace: &mut Vec<f64>) -> (Design, f64) {
    let net = eval.network();
    let cost = |p: usize| net.projects[p].cost;
    loop {
        let spent = d.edge_cost(net);
        let sel = d.selected_projects();
        let unsel: Vec<usize> = (0..net.n_projects()).filter(|&p| !d.projects[p]).collect();
        let mut moves = Vec::new();
        for &a in &unsel {
            if affordable(cost(a), spent, budget) {
                moves.push(Move::Add(a));
            }
        }
        for &r in &sel {
            moves.push(Move::Drop(r));
            for &a in &unsel {
                if affordable(cost(a) - cost(r), spent, budget) {
                    moves.push(Move::Swap(r, a));
                }
            }
        }
        let vals: Vec<f64> = moves.par_iter().map(|&mv| eval.value_or_neg_inf(&apply(&d, mv))).collect();
        match argmax_first(&vals) {
            Some(i) if improves(vals[i], f) => {
                d = apply(&d, moves[i]);
                f = vals[i];
                trace.push(f);
            }
            _ => break,
        }
    }
    (d, f)
}

fn check_budget(budget: &Budget) -> Result<(), OptimizeError> {
    if !(budget.edge >= 0.0) || !(budget.node >= 0.0) {
        return Err(OptimizeError::InvalidParam("budgets must be nonnegative".into()));
    }
    Ok(())
}

fn local_search(eval: &Evaluator<'_>, budget: &Budget, seed: u64, restarts: usize) -> (Design, f64, Vec<Vec<f64>>) {
    let net = eval.network();
    let mut best: Option<(Design, f64)> = None;
    let mut traces = Vec::new();
    for r in 0..restarts.max(1) {
        let mut trace = Vec::new();
        let (d0, f0) = if r == 0 {
            greedy_per_cost(eval, budget, &mut trace)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64, 0x15));
            let d = random_maximal(net, budget, &mut rng);
            let f = eval.value_or_neg_inf(&d);
            trace.push(f);
            (d, f)
        };
        let (d, f) = improve(eval, budget, d0, f0, &mut trace);
        traces.push(trace);
        if best.as_ref().is_none_or(|(_, b)| improves(f, *b)) {
            best = Some((d, f));
        }
    }
    let (d, f) = best.expect("at least one restart");
    (d, f, traces)
}

/// Greedy start plus random maximal restarts, each refined to a local
/// optimum of the add/drop/swap neighborhood. Node variables stay at zero.
pub fn local_search_solve(
    spec: &ObjectiveSpec,
    network: &Network,
    budget: &Budget,
    seed: u64,
    restarts: usize,
) -> Result<SolveResult, OptimizeError> {
    check_budget(budget)?;
    let start = Instant::now();
    let eval = Evaluator::new(network, spec)?;
    let (design, objective, trace) = local_search(&eval, budget, seed, restarts);
    if objective == f64::NEG_INFINITY {
        return Err(OptimizeError::NoFeasibleDesign);
    }
    let exact_objective = exact_value(network, &design, &spec.impedance);
    Ok(SolveResult {
        design,
        objective,
        exact_objective,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    })
}

fn exact_value(network: &Network, design: &Design, impedance: &ImpedanceSpec) -> f64 {
    crate::routing::total_accessibility(network, design, impedance)
}

pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Project subsets within the edge budget, in depth-first lexicographic
/// order starting with the empty set.
pub fn feasible_subsets(network: &Network, budget: &Budget, limit: usize) -> Result<Vec<Vec<usize>>, OptimizeError> {
    fn rec(
        costs: &[f64],
        from: usize,
        spent: f64,
        cap: f64,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        out.push(cur.clone());
        if out.len() > limit {
            return false;
        }
        for p in from..costs.len() {
            if spent + costs[p] <= cap {
                cur.push(p);
                let ok = rec(costs, p + 1, spent + costs[p], cap, cur, out, limit);
                cur.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    let costs: Vec<f64> = network.projects.iter().map(|p| p.cost).collect();
    let mut out = Vec::new();
    if !rec(&costs, 0, 0.0, budget.edge + 1e-9, &mut Vec::new(), &mut out, limit) {
        return Err(OptimizeError::TooManySubsets { limit });
    }
    Ok(out)
}

/// Global optimum over feasible project subsets; ties go to the first
/// subset in enumeration order.
pub fn exhaustive_solve(spec: &ObjectiveSpec, network: &Network, budget: &Budget) -> Result<SolveResult, OptimizeError> {
    check_budget(budget)?;
    let start = Instant::now();
    let eval = Evaluator::new(network, spec)?;
    let subsets = feasible_subsets(network, budget, ENUMERATION_LIMIT)?;
    let vals: Vec<f64> = subsets
        .par_iter()
        .map(|s| {
            let mut d = Design::empty(network);
            s.iter().for_each(|&p| d.projects[p] = true);
            eval.value_or_neg_inf(&d)
        })
        .collect();
    let i = argmax_first(&vals).expect("empty subset always enumerated");
    if vals[i] == f64::NEG_INFINITY {
        return Err(OptimizeError::NoFeasibleDesign);
    }
    let mut design = Design::empty(network);
    subsets[i].iter().for_each(|&p| design.projects[p] = true);
    let exact_objective = exact_value(network, &design, &spec.impedance);
    Ok(SolveResult {
        design,
        objective: vals[i],
        exact_objective,
        wall_time: start.elapsed().as_secs_f64(),
        trace: vec![vec![vals[i]]],
    })
}

/// Edge budget equal to the `k` cheapest project costs, so that no
/// feasible design holds more than `k` projects.
pub fn budget_for_max_projects(network: &Network, k: usize) -> Budget {
    let mut costs: Vec<f64> = network.projects.iter().map(|p| p.cost).collect();
    costs.sort_by(f64::total_cmp);
    Budget::edge_only(costs.iter().take(k).sum())
}

/// One step of the greedy expansion.
#[derive(Debug, Clone)]
pub struct GreedyStep {
    pub added: Option<usize>,
    pub design: Design,
    pub cost: f64,
    pub objective: f64,
}

/// Adds the affordable project of `pool` with the largest exact gain until
/// the budget is spent or no addition helps.
pub fn greedy_expand(network: &Network, pool: &[usize], budget: &Budget, impedance: &ImpedanceSpec) -> Vec<GreedyStep> {
    let eval = Evaluator::new(network, &ObjectiveSpec::exact(*impedance)).expect("exact evaluator");
    let mut d = Design::empty(network);
    let mut f = eval.value_or_neg_inf(&d);
    let mut steps = vec![GreedyStep {
        added: None,
        design: d.clone(),
        cost: 0.0,
        objective: f,
    }];
    let mut pool: Vec<usize> = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    loop {
        let spent = d.edge_cost(network);
        let cands: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&p| !d.projects[p] && affordable(network.projects[p].cost, spent, budget))
            .collect();
        let vals: Vec<f64> = cands.par_iter().map(|&p| eval.value_or_neg_inf(&d.with_project(p))).collect();
        match argmax_first(&vals) {
            Some(i) if improves(vals[i], f) => {
                d = d.with_project(cands[i]);
                f = vals[i];
                steps.push(GreedyStep {
                    added: Some(cands[i]),
                    design: d.clone(),
                    cost: d.edge_cost(network),
                    objective: f,
                });
            }
            _ => break,
        }
    }
    steps
}

/// Knobs shared by the two sampling-based solution methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    /// random feasible designs used for tuning
    pub n_d: usize,
    pub restarts: usize,
    pub vap: VapParams,
    pub n_repeat: usize,
    pub p_max: usize,
    pub sampler: Method,
    pub seed: u64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            n_d: 20,
            restarts: 1,
            vap: VapParams::default(),
            n_repeat: 50,
            p_max: 25,
            sampler: Method::Med,
            seed: 0,
        }
    }
}

fn tuning_designs(network: &Network, budget: &Budget, config: &MethodConfig) -> Result<Vec<Design>, OptimizeError> {
    let q_max = if budget.node > 0.0 {
        network.high_stress_nodes().len().min(10)
    } else {
        0
    };
    Ok(sample_feasible_designs(
        network,
        config.n_d,
        budget,
        config.p_max.min(network.n_projects()),
        q_max,
        mix_seed(config.seed, 0xD5, 0),
    )?)
}

/// Follower sample of size `p` by the configured sampler.
pub fn draw_sample(features: &FollowerFeatures, p: usize, k: usize, config: &MethodConfig, salt: u64) -> Result<Sample, OptimizeError> {
    let seed = mix_seed(config.seed, salt, 0);
    Ok(match config.sampler {
        Method::Med => vap_median_sample(features, p, k, &config.vap, mix_seed(seed, k as u64, 0))?.sample,
        Method::Cen => p_center_sample(features, p, k, config.n_repeat, seed)?.sample,
        Method::Uni | Method::Fixed => uniform_sample(features, p, k, seed)?,
    })
}

/// Mean out-of-sample kNN loss for every k in 1..=p, averaged over the
/// datasets.
pub fn knn_loss_curve(
    features: &FollowerFeatures,
    datasets: &[Vec<f64>],
    p: usize,
    seed: u64,
) -> Result<Vec<f64>, OptimizeError> {
    let mut total = vec![0.0; p];
    for (i, targets) in datasets.iter().enumerate() {
        let split = uniform_sample(features, p, 1, mix_seed(seed, 0xA1, i as u64))?;
        let member = split.is_member();
        let outside: Vec<usize> = (0..features.len()).filter(|&s| !member[s]).collect();
        let mut e = vec![0.0; p];
        for &s in &outside {
            let fs = features.get(s);
            let mut d: Vec<(f64, usize)> = split.members.iter().map(|&t| (euclidean(fs, features.get(t)), t)).collect();
            d.sort_by(|a, b| cmp_dist_id(*a, *b));
            let mut acc = 0.0;
            for (k, &(_, t)) in d.iter().enumerate() {
                acc += targets[t];
                e[k] += (acc / (k + 1) as f64 - targets[s]).abs();
            }
        }
        let n_out = outside.len().max(1) as f64;
        for k in 0..p {
            total[k] += e[k] / n_out;
        }
    }
    let n = datasets.len().max(1) as f64;
    Ok(total.into_iter().map(|v| v / n).collect())
}

#[derive(Debug, Clone)]
pub struct KnnMethodResult {
    pub result: SolveResult,
    pub k_star: usize,
    pub mean_losses: Vec<f64>,
    /// (k, exact F) per candidate in the window
    pub candidates: Vec<(usize, f64)>,
}

/// Tunes k on random-design datasets, then solves the kNN-augmented model
/// for every k in the window around the best k and keeps the design with
/// the best full-follower objective.
pub fn algorithm1_knn(
    network: &Network,
    features: &FollowerFeatures,
    impedance: &ImpedanceSpec,
    p: usize,
    omega: usize,
    budget: &Budget,
    config: &MethodConfig,
) -> Result<KnnMethodResult, OptimizeError> {
    if p == 0 {
        return Err(OptimizeError::InvalidParam("sample size must be positive".into()));
    }
    check_budget(budget)?;
    let start = Instant::now();
    let designs = tuning_designs(network, budget, config)?;
    let oracle = FollowerOracle::all(network, impedance.t2);
    let datasets: Vec<Vec<f64>> = designs.iter().map(|d| oracle.accessibilities(network, d, impedance)).collect();
    let mean_losses = knn_loss_curve(features, &datasets, p, config.seed)?;
    let k_star = argmin_first(&mean_losses).map_or(1, |i| i + 1);
    let lo = k_star.saturating_sub(omega).max(1);
    let hi = (k_star + omega).min(p);
    let mut best: Option<(SolveResult, f64)> = None;
    let mut candidates = Vec::new();
    let mut traces = Vec::new();
    for k in lo..=hi {
        let sample = draw_sample(features, p, k, config, 0xA2)?;
        let spec = ObjectiveSpec::knn_aug(*impedance, sample, features.clone(), k);
        let res = local_search_solve(&spec, network, budget, mix_seed(config.seed, 0xA3, k as u64), config.restarts)?;
        candidates.push((k, res.exact_objective));
        traces.extend(res.trace.iter().cloned());
        if best.as_ref().is_none_or(|(_, f)| improves(res.exact_objective, *f)) {
            let f = res.exact_objective;
            best = Some((res, f));
        }
    }
    let (mut result, _) = best.expect("window is nonempty");
    result.wall_time = start.elapsed().as_secs_f64();
    result.trace = traces;
    Ok(KnnMethodResult {
        result,
        k_star,
        mean_losses,
        candidates,
    })
}

fn argmin_first(values: &[f64]) -> Option<usize> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    argmax_first(&neg)
}

/// Least-absolute-deviation fit with ‖w‖₁ ≤ lambda_reg; returns the mean
/// training loss.
pub fn lad_fit_loss(member_features: &[Vec<f64>], targets: &[f64], lambda_reg: f64) -> Result<f64, OptimizeError> {
    let n = targets.len();
    let dim = member_features.first().map_or(0, |f| f.len());
    let nv = 2 * dim + n;
    let mut obj = vec![0.0; nv];
    obj[2 * dim..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = DenseLp::new(Sense::Minimize, obj);
    for t in 0..n {
        let f = &member_features[t];
        let mut up = vec![0.0; nv];
        let mut dn = vec![0.0; nv];
        for k in 0..dim {
            up[k] = f[k];
            up[dim + k] = -f[k];
            dn[k] = -f[k];
            dn[dim + k] = f[k];
        }
        up[2 * dim + t] = -1.0;
        dn[2 * dim + t] = -1.0;
        lp.add_le(up, targets[t]);
        lp.add_le(dn, -targets[t]);
    }
    if lambda_reg.is_finite() {
        let mut row = vec![0.0; nv];
        row[..2 * dim].iter_mut().for_each(|v| *v = 1.0);
        lp.add_le(row, lambda_reg);
    }
    match solve_lp(&lp, 1e-9)? {
        LpOutcome::Optimal { objective, .. } => Ok(objective / n.max(1) as f64),
        _ => Err(OptimizeError::InnerUnbounded),
    }
}

#[derive(Debug, Clone)]
pub struct RegMethodResult {
    pub result: SolveResult,
    /// mean-loss median over the tuning datasets
    pub l0_mean: f64,
    /// (L̄, exact F) per solve, in order
    pub iterates: Vec<(f64, f64)>,
}

/// Starts from the median training loss of random-design fits (scaled to
/// the Σ m_t |·| constraint), then raises L̄ by `l_step` until the
/// full-follower objective worsens and returns the previous iterate.
#[allow(clippy::too_many_arguments)]
pub fn algorithm2_reg(
    network: &Network,
    features: &FollowerFeatures,
    impedance: &ImpedanceSpec,
    p: usize,
    l_step: f64,
    lambda_reg: f64,
    budget: &Budget,
    config: &MethodConfig,
    max_steps: usize,
) -> Result<RegMethodResult, OptimizeError> {
    if p == 0 {
        return Err(OptimizeError::InvalidParam("sample size must be positive".into()));
    }
    if !(l_step > 0.0) {
        return Err(OptimizeError::InvalidParam("loss step must be positive".into()));
    }
    check_budget(budget)?;
    let start = Instant::now();
    let designs = tuning_designs(network, budget, config)?;
    let oracle = FollowerOracle::all(network, impedance.t2);
    let mut losses = Vec::with_capacity(designs.len());
    for (i, d) in designs.iter().enumerate() {
        let g = oracle.accessibilities(network, d, impedance);
        let split = uniform_sample(features, p, 1, mix_seed(config.seed, 0xB1, i as u64))?;
        let fm: Vec<Vec<f64>> = split.members.iter().map(|&t| features.get(t).to_vec()).collect();
        let gt: Vec<f64> = split.members.iter().map(|&t| g[t]).collect();
        losses.push(lad_fit_loss(&fm, &gt, lambda_reg)?);
    }
    let l0_mean = if losses.is_empty() { 0.0 } else { median(&losses) };
    let sample = draw_sample(features, p, 1, config, 0xB2)?;
    let n_out = (features.len() - sample.p()) as f64;
    let fmax = sample
        .members
        .iter()
        .flat_map(|&t| features.get(t).iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let l_cap = n_out * (1.0 + lambda_reg * fmax);
    let solve = |l: f64| {
        let spec = ObjectiveSpec::reg_aug(*impedance, sample.clone(), features.clone(), l, lambda_reg);
        local_search_solve(&spec, network, budget, mix_seed(config.seed, 0xB3, 0), config.restarts)
    };
    let mut l = l0_mean * n_out;
    let mut prev = loop {
        match solve(l) {
            Ok(r) => break r,
            Err(OptimizeError::NoFeasibleDesign) if l < 1e12 => {
                l = if l > 0.0 { 2.0 * l } else { 1e-6 };
            }
            Err(e) => return Err(e),
        }
    };
    let mut iterates = vec![(l, prev.exact_objective)];
    let mut traces = prev.trace.clone();
    for _ in 0..max_steps {
        if l >= l_cap {
            break;
        }
        l += l_step;
        let cur = solve(l)?;
        iterates.push((l, cur.exact_objective));
        traces.extend(cur.trace.iter().cloned());
        let worse = cur.exact_objective < prev.exact_objective;
        let same = cur.design == prev.design;
        if worse || same {
            break;
        }
        prev = cur;
    }
    prev.wall_time = start.elapsed().as_secs_f64();
    prev.trace = traces;
    Ok(RegMethodResult {
        result: prev,
        l0_mean,
        iterates,
    })
}

/// (F(x*) − F(x̂)) / F(x*); zero when the optimum is zero.
pub fn optimality_gap(optimum: f64, value: f64) -> f64 {
    if optimum > 0.0 {
        (optimum - value) / optimum
    } else {
        0.0
    }
}
