//! Follower representation learning: leader-design sampling, the cost
//! similarity relationship graph, weighted random walks over it, and a
//! skip-gram embedding of the walk corpus.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::Network;
use crate::routing::{traversable, Budget, Design, FollowerOracle, ImpedanceSpec};
use crate::util::mix_seed;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("infeasible design-sampler bounds: {0}")]
    Bounds(String),
    #[error("relationship graph has no positive edge; nothing to embed")]
    EmptyGraph,
    #[error("need at least 2 followers, got {0}")]
    TooFewFollowers(usize),
    #[error("empty walk corpus")]
    EmptyCorpus,
    #[error("invalid walk configuration: {0}")]
    Config(String),
    #[error("feature file {path}: {message}")]
    Format { path: String, message: String },
    #[error("could not draw {wanted} budget-feasible designs in {attempts} attempts")]
    Rejection { wanted: usize, attempts: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSampleSet {
    pub designs: Vec<Design>,
    pub n_sim: usize,
    pub p_max: usize,
    pub q_max: usize,
}

fn random_design(
    network: &Network,
    high: &[usize],
    p_max: usize,
    q_max: usize,
    rng: &mut ChaCha8Rng,
) -> Design {
    let mut d = Design::empty(network);
    let p = rng.gen_range(1..=p_max);
    for i in sample_indices(rng, network.n_projects(), p) {
        d.projects[i] = true;
    }
    if q_max > 0 {
        let q = rng.gen_range(1..=q_max);
        for i in sample_indices(rng, high.len(), q) {
            d.nodes[high[i]] = true;
        }
    }
    d
}

fn check_bounds(network: &Network, p_max: usize, q_max: usize) -> Result<usize, EmbedError> {
    let n_high = network.high_stress_nodes().len();
    if p_max == 0 || p_max > network.n_projects() {
        return Err(EmbedError::Bounds(format!(
            "P must lie in 1..={}, got {p_max}",
            network.n_projects()
        )));
    }
    if q_max > n_high {
        return Err(EmbedError::Bounds(format!(
            "Q must be at most {n_high}, got {q_max}"
        )));
    }
    Ok(n_high)
}

/// Draws `n_sim` designs: `p ~ U{1..p_max}` projects and `q ~ U{1..q_max}`
/// high-stress nodes, each uniformly without replacement. `q_max = 0`
/// draws no nodes.
pub fn sample_designs(
    network: &Network,
    n_sim: usize,
    p_max: usize,
    q_max: usize,
    seed: u64,
) -> Result<DesignSampleSet, EmbedError> {
    check_bounds(network, p_max, q_max)?;
    let high = network.high_stress_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let designs = (0..n_sim)
        .map(|_| random_design(network, &high, p_max, q_max, &mut rng))
        .collect();
    Ok(DesignSampleSet {
        designs,
        n_sim,
        p_max,
        q_max,
    })
}

/// Like [`sample_designs`] but rejects designs that violate `budget`.
pub fn sample_feasible_designs(
    network: &Network,
    n: usize,
    budget: &Budget,
    p_max: usize,
    q_max: usize,
    seed: u64,
) -> Result<Vec<Design>, EmbedError> {
    check_bounds(network, p_max, q_max)?;
    let high = network.high_stress_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let max_attempts = 1000 * n.max(1);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(EmbedError::Rejection {
                wanted: n,
                attempts: max_attempts,
            });
        }
        let d = random_design(network, &high, p_max, q_max, &mut rng);
        if d.is_feasible(network, budget) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Follower accessibilities under each sampled design, row-major by
/// follower.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub n_followers: usize,
    pub n_designs: usize,
    data: Vec<f32>,
}

impl CostMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_designs = rows.first().map_or(0, |r| r.len());
        let data = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), n_designs, "ragged cost matrix");
                r.iter().map(|&v| v as f32)
            })
            .collect();
        CostMatrix {
            n_followers: rows.len(),
            n_designs,
            data,
        }
    }

    pub fn row(&self, s: usize) -> &[f32] {
        &self.data[s * self.n_designs..(s + 1) * self.n_designs]
    }

    pub fn get(&self, s: usize, i: usize) -> f64 {
        self.data[s * self.n_designs + i] as f64
    }

    pub fn is_zero_row(&self, s: usize) -> bool {
        self.row(s).iter().all(|&v| v == 0.0)
    }
}

pub fn cost_matrix(network: &Network, designs: &[Design], impedance: &ImpedanceSpec) -> CostMatrix {
    let oracle = FollowerOracle::all(network, impedance.t2);
    let columns: Vec<Vec<f64>> = designs
        .par_iter()
        .map(|d| {
            let mask = traversable(network, d);
            oracle
                .times_masked(network, &mask)
                .into_iter()
                .map(|t| impedance.g(t))
                .collect()
        })
        .collect();
    let n_s = network.n_followers();
    let n_d = designs.len();
    let mut data = vec![0f32; n_s * n_d];
    for (i, col) in columns.iter().enumerate() {
        for (s, &v) in col.iter().enumerate() {
            data[s * n_d + i] = v as f32;
        }
    }
    CostMatrix {
        n_followers: n_s,
        n_designs: n_d,
        data,
    }
}

pub const PHI_EPSILON: f64 = 1e-6;

/// Average cost similarity `π_st` of two cost rows.
pub fn similarity(gs: &[f64], gt: &[f64], epsilon: f64) -> f64 {
    assert_eq!(gs.len(), gt.len());
    if gs.is_empty() {
        return 0.0;
    }
    let total: f64 = gs
        .iter()
        .zip(gt)
        .map(|(&a, &b)| (a / (b + epsilon)).min(b / (a + epsilon)))
        .sum();
    total / gs.len() as f64
}

fn similarity_f32(a: &[f32], b: &[f32], eps: f32) -> f32 {
    let mut lanes = [0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] += (x[k] / (y[k] + eps)).min(y[k] / (x[k] + eps));
        }
    }
    let mut total: f32 = lanes.iter().sum();
    for (&x, &y) in ra.iter().zip(rb) {
        total += (x / (y + eps)).min(y / (x + eps));
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// All transition rows are computed once and kept.
    Dense,
    /// Rows are recomputed at every walk step; memory stays linear in |S|.
    OnTheFly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub n_walk: usize,
    pub l_walk: usize,
    pub window: usize,
    pub epsilon: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub mode: GraphMode,
    /// Keep only the `k` most similar neighbors of each follower.
    pub top_k: Option<usize>,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            n_walk: 50,
            l_walk: 20,
            window: 5,
            epsilon: PHI_EPSILON,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            mode: GraphMode::Dense,
            top_k: None,
        }
    }
}

impl WalkConfig {
    fn validate(&self) -> Result<(), EmbedError> {
        if self.n_walk == 0 || self.l_walk == 0 || self.window == 0 || self.epochs == 0 {
            return Err(EmbedError::Config("counts must be positive".into()));
        }
        if !(self.epsilon > 0.0) || !(self.learning_rate > 0.0) {
            return Err(EmbedError::Config(
                "epsilon and learning rate must be positive".into(),
            ));
        }
        if self.top_k == Some(0) {
            return Err(EmbedError::Config("top_k must be positive".into()));
        }
        Ok(())
    }
}

/// Transition structure over the embeddable followers.
pub struct RelationshipGraph<'a> {
    matrix: &'a CostMatrix,
    epsilon: f32,
    /// followers with at least one positive similarity
    pub active: Vec<bool>,
    rows: Rows,
    top_k: Option<usize>,
}

enum Rows {
    /// cumulative weights, one row of length |S| per follower
    Dense(Vec<Vec<f32>>),
    /// (neighbor, cumulative weight)
    Sparse(Vec<Vec<(u32, f32)>>),
    OnTheFly,
}

impl<'a> RelationshipGraph<'a> {
    pub fn build(matrix: &'a CostMatrix, config: &WalkConfig) -> Self {
        let n = matrix.n_followers;
        let eps = config.epsilon as f32;
        let nonzero: Vec<bool> = (0..n).map(|s| !matrix.is_zero_row(s)).collect();
        let row_of = |s: usize| -> Vec<f32> {
            let mut row = vec![0f32; n];
            if nonzero[s] {
                let a = matrix.row(s);
                for t in 0..n {
                    if t != s && nonzero[t] {
                        row[t] = similarity_f32(a, matrix.row(t), eps) / matrix.n_designs as f32;
                    }
                }
            }
            row
        };
        let mut graph = RelationshipGraph {
            matrix,
            epsilon: eps,
            active: vec![false; n],
            rows: Rows::OnTheFly,
            top_k: config.top_k,
        };
        match (config.mode, config.top_k) {
            (GraphMode::OnTheFly, _) => {
                graph.active = (0..n)
                    .into_par_iter()
                    .map(|s| row_of(s).iter().any(|&v| v > 0.0))
                    .collect();
            }
            (GraphMode::Dense, None) => {
                let rows: Vec<Vec<f32>> = (0..n)
                    .into_par_iter()
                    .map(|s| {
                        let mut r = row_of(s);
                        cumulate(&mut r);
                        r
                    })
                    .collect();
                graph.active = rows
                    .iter()
                    .map(|r| r.last().is_some_and(|&v| v > 0.0))
                    .collect();
                graph.rows = Rows::Dense(rows);
            }
            (GraphMode::Dense, Some(k)) => {
                let rows: Vec<Vec<(u32, f32)>> = (0..n)
                    .into_par_iter()
                    .map(|s| sparsify(&row_of(s), k))
                    .collect();
                graph.active = rows.iter().map(|r| !r.is_empty()).collect();
                graph.rows = Rows::Sparse(rows);
            }
        }
        graph
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// π_st for the pair (computed directly from the cost rows).
    pub fn weight(&self, s: usize, t: usize) -> f64 {
        self.weight_f32(s, t) as f64
    }

    fn weight_f32(&self, s: usize, t: usize) -> f32 {
        if s == t {
            return 0.0;
        }
        similarity_f32(self.matrix.row(s), self.matrix.row(t), self.epsilon)
            / self.matrix.n_designs as f32
    }

    fn next(&self, v: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        match &self.rows {
            Rows::Dense(rows) => pick_dense(&rows[v], rng),
            Rows::Sparse(rows) => pick_sparse(&rows[v], rng),
            Rows::OnTheFly => {
                let n = self.matrix.n_followers;
                let mut row: Vec<f32> = (0..n)
                    .map(|t| {
                        if self.active[t] {
                            self.weight_f32(v, t)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if let Some(k) = self.top_k {
                    return pick_sparse(&sparsify(&row, k), rng);
                }
                cumulate(&mut row);
                pick_dense(&row, rng)
            }
        }
    }
}

fn cumulate(row: &mut [f32]) {
    let mut acc = 0f64;
    for v in row.iter_mut() {
        acc += *v as f64;
        *v = acc as f32;
    }
}

fn sparsify(row: &[f32], k: usize) -> Vec<(u32, f32)> {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&t| row[t] > 0.0).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    let mut acc = 0f64;
    idx.into_iter()
        .map(|t| {
            acc += row[t] as f64;
            (t as u32, acc as f32)
        })
        .collect()
}

fn pick_dense(cdf: &[f32], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total = *cdf.last()?;
    if !(total > 0.0) {
        return None;
    }
    let u = rng.gen::<f32>() * total;
    let mut i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
    while i > 0 && cdf[i] <= cdf[i - 1] {
        i -= 1;
    }
    Some(i)
}

fn pick_sparse(cdf: &[(u32, f32)], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total = cdf.last()?.1;
    if !(total > 0.0) {
        return None;
    }
    let u = rng.gen::<f32>() * total;
    let i = cdf.partition_point(|&(_, c)| c <= u).min(cdf.len() - 1);
    Some(cdf[i].0 as usize)
}

/// Weighted random walks: `n_walk` walks of `l_walk` nodes from every
/// active follower. Walk `(r, s)` uses its own RNG stream so the corpus
/// does not depend on scheduling.
pub fn random_walks(
    graph: &RelationshipGraph<'_>,
    config: &WalkConfig,
    seed: u64,
) -> Result<Vec<Vec<u32>>, EmbedError> {
    config.validate()?;
    let n = graph.active.len();
    if n < 2 {
        return Err(EmbedError::TooFewFollowers(n));
    }
    let starts: Vec<usize> = (0..n).filter(|&s| graph.active[s]).collect();
    if starts.is_empty() {
        return Err(EmbedError::EmptyGraph);
    }
    let jobs: Vec<(usize, usize)> = (0..config.n_walk)
        .flat_map(|r| starts.iter().map(move |&s| (r, s)))
        .collect();
    let walks = jobs
        .par_iter()
        .map(|&(r, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64, s as u64));
            let mut walk = Vec::with_capacity(config.l_walk);
            walk.push(s as u32);
            let mut cur = s;
            while walk.len() < config.l_walk {
                match graph.next(cur, &mut rng) {
                    Some(t) => {
                        walk.push(t as u32);
                        cur = t;
                    }
                    None => break,
                }
            }
            walk
        })
        .collect();
    Ok(walks)
}

/// Per-follower embedding vectors plus normalization metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerFeatures {
    pub dim: usize,
    pub values: Vec<Vec<f64>>,
    pub unembedded: Vec<bool>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub normalized: bool,
}

impl FollowerFeatures {
    pub fn new(values: Vec<Vec<f64>>, unembedded: Vec<bool>) -> Self {
        let dim = values.first().map_or(0, |v| v.len());
        FollowerFeatures {
            dim,
            min: vec![0.0; dim],
            max: vec![1.0; dim],
            values,
            unembedded,
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize) -> &[f64] {
        &self.values[s]
    }

    /// Per-dimension min-max scaling over embedded followers; unembedded
    /// followers keep the zero vector. Constant dimensions map to 0.
    pub fn normalize(&mut self) {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for (v, &u) in self.values.iter().zip(&self.unembedded) {
            if u {
                continue;
            }
            for k in 0..dim {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        for (v, &u) in self.values.iter_mut().zip(&self.unembedded) {
            for k in 0..dim {
                v[k] = if u || !(hi[k] > lo[k]) {
                    0.0
                } else {
                    ((v[k] - lo[k]) / (hi[k] - lo[k])).clamp(0.0, 1.0)
                };
            }
        }
        for k in 0..dim {
            if !lo[k].is_finite() {
                lo[k] = 0.0;
                hi[k] = 0.0;
            }
        }
        self.min = lo;
        self.max = hi;
        self.normalized = true;
    }

    /// CSV with header `od_id,f_1..f_dim,unembedded`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["od_id".to_string()];
        header.extend((1..=self.dim).map(|k| format!("f_{k}")));
        header.push("unembedded".into());
        w.write_record(&header).expect("in-memory csv");
        for (s, v) in self.values.iter().enumerate() {
            let mut rec = vec![s.to_string()];
            rec.extend(v.iter().map(|x| format!("{x}")));
            rec.push(if self.unembedded[s] { "1" } else { "0" }.into());
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self, EmbedError> {
        let err = |m: String| EmbedError::Format {
            path: origin.to_string(),
            message: m,
        };
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| err(e.to_string()))?.clone();
        let dim = header
            .len()
            .checked_sub(2)
            .ok_or_else(|| err("too few columns".into()))?;
        let has_flag = header.get(header.len() - 1) == Some("unembedded");
        let dim = if has_flag { dim } else { dim + 1 };
        let mut values = Vec::new();
        let mut unembedded = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let id: usize = rec[0]
                .parse()
                .map_err(|e| err(format!("row {line}: {e}")))?;
            if id != values.len() {
                return Err(err(format!("row {line}: od ids must be dense and ordered")));
            }
            let mut v = Vec::with_capacity(dim);
            for k in 0..dim {
                v.push(
                    rec[k + 1]
                        .parse::<f64>()
                        .map_err(|e| err(format!("row {line}: {e}")))?,
                );
            }
            values.push(v);
            unembedded.push(has_flag && &rec[dim + 1] == "1");
        }
        let mut f = FollowerFeatures::new(values, unembedded);
        f.dim = dim;
        f.min = vec![0.0; dim];
        f.max = vec![1.0; dim];
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let mut file = fs::File::create(path).map_err(|e| EmbedError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        file.write_all(self.to_csv().as_bytes())
            .map_err(|e| EmbedError::Format {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = fs::read_to_string(path).map_err(|e| EmbedError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramResult {
    pub features: FollowerFeatures,
    /// mean loss per block of training pairs, in training order
    pub loss_trace: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else if x < -30.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Skip-gram with negative sampling over `corpus`, which holds follower ids
/// below `n_followers`. Followers absent from the corpus get the zero
/// vector and the unembedded flag. The output is min-max normalized when
/// `normalize` is set.
pub fn skipgram_embed(
    corpus: &[Vec<u32>],
    n_followers: usize,
    dim: usize,
    config: &WalkConfig,
    normalize: bool,
    seed: u64,
) -> Result<SkipGramResult, EmbedError> {
    config.validate()?;
    if dim == 0 {
        return Err(EmbedError::Config("dimension must be positive".into()));
    }
    let mut counts = vec![0u64; n_followers];
    for w in corpus {
        for &t in w {
            counts[t as usize] += 1;
        }
    }
    let total_tokens: u64 = counts.iter().sum();
    if total_tokens == 0 {
        return Err(EmbedError::EmptyCorpus);
    }
    // unigram^0.75 noise distribution as a cumulative table
    let mut noise_cdf = Vec::with_capacity(n_followers);
    let mut acc = 0.0;
    for &c in &counts {
        acc += (c as f64).powf(0.75);
        noise_cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut input: Vec<f64> = (0..n_followers * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0f64; n_followers * dim];
    let pairs_per_epoch: usize = corpus
        .iter()
        .map(|w| {
            let l = w.len();
            (0..l)
                .map(|i| i.min(config.window) + (l - 1 - i).min(config.window))
                .sum::<usize>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * config.epochs).max(1);
    let block = (total_pairs / 200).max(1);
    let lr0 = config.learning_rate;
    let lr_min = lr0 * 1e-4;
    let mut done = 0usize;
    let mut block_loss = 0.0;
    let mut block_n = 0usize;
    let mut loss_trace = Vec::new();
    let mut grad = vec![0f64; dim];
    for _ in 0..config.epochs {
        for walk in corpus {
            let l = walk.len();
            for i in 0..l {
                let center = walk[i] as usize;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(l - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context = walk[j] as usize;
                    let lr = (lr0 * (1.0 - done as f64 / total_pairs as f64)).max(lr_min);
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let vin = center * dim;
                    let mut loss = 0.0;
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let u = rng.gen::<f64>() * acc;
                            let t = noise_cdf.partition_point(|&c| c <= u).min(n_followers - 1);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let vout = target * dim;
                        let dot: f64 = (0..dim).map(|d| input[vin + d] * output[vout + d]).sum();
                        let p = sigmoid(dot);
                        loss -= if label > 0.0 {
                            p.max(1e-12).ln()
                        } else {
                            (1.0 - p).max(1e-12).ln()
                        };
                        let g = (label - p) * lr;
                        for d in 0..dim {
                            grad[d] += g * output[vout + d];
                            output[vout + d] += g * input[vin + d];
                        }
                    }
                    for d in 0..dim {
                        input[vin + d] += grad[d];
                    }
                    done += 1;
                    block_loss += loss;
                    block_n += 1;
                    if block_n == block {
                        loss_trace.push(block_loss / block_n as f64);
                        block_loss = 0.0;
                        block_n = 0;
                    }
                }
            }
        }
    }
    if block_n > 0 {
        loss_trace.push(block_loss / block_n as f64);
    }
    let unembedded: Vec<bool> = counts.iter().map(|&c| c == 0).collect();
    let values: Vec<Vec<f64>> = (0..n_followers)
        .map(|s| {
            if unembedded[s] {
                vec![0.0; dim]
            } else {
                input[s * dim..(s + 1) * dim].to_vec()
            }
        })
        .collect();
    let mut features = FollowerFeatures::new(values, unembedded);
    if normalize {
        features.normalize();
    }
    Ok(SkipGramResult {
        features,
        loss_trace,
    })
}

/// End-to-end settings for learning follower features on an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub n_sim: usize,
    pub p_max: usize,
    pub q_max: usize,
    pub dim: usize,
    pub normalize: bool,
    pub walk: WalkConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            n_sim: 5000,
            p_max: 25,
            q_max: 10,
            dim: 16,
            normalize: true,
            walk: WalkConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbedReport {
    pub features: FollowerFeatures,
    pub loss_trace: Vec<f64>,
    pub n_active: usize,
    pub n_walks: usize,
}

/// Designs, cost matrix, walks and skip-gram in one deterministic pass.
pub fn embed_followers(
    network: &Network,
    impedance: &ImpedanceSpec,
    config: &EmbedConfig,
    seed: u64,
) -> Result<EmbedReport, EmbedError> {
    let designs = sample_designs(
        network,
        config.n_sim,
        config.p_max,
        config.q_max,
        mix_seed(seed, 1, 0),
    )?;
    let matrix = cost_matrix(network, &designs.designs, impedance);
    let graph = RelationshipGraph::build(&matrix, &config.walk);
    let walks = random_walks(&graph, &config.walk, mix_seed(seed, 2, 0))?;
    let sg = skipgram_embed(
        &walks,
        network.n_followers(),
        config.dim,
        &config.walk,
        config.normalize,
        mix_seed(seed, 3, 0),
    )?;
    Ok(EmbedReport {
        features: sg.features,
        loss_trace: sg.loss_trace,
        n_active: graph.n_active(),
        n_walks: walks.len(),
    })
}
