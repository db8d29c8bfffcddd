//! Prediction models over follower features, the geometric baseline
//! features, and the out-of-sample prediction experiment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{sample_feasible_designs, FollowerFeatures};
use crate::netcore::Network;
use crate::routing::{dijkstra_all, traversable, Budget, Design, FollowerOracle, ImpedanceSpec};
use crate::sampler::{
    fixed_sample, p_center_sample, uniform_sample, vap_median_sample, Method, Sample, VapParams,
};
use crate::util::{cmp_dist_id, euclidean, mean, median, mix_seed};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("empty training set")]
    Empty,
    #[error("k = {k} must lie in 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("feature/target length mismatch")]
    Shape,
    #[error("linear algebra failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
}

/// Followers' features paired with their accessibility under one design.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<usize>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(ids: Vec<usize>, features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, PredictError> {
        if ids.len() != features.len() || ids.len() != targets.len() {
            return Err(PredictError::Shape);
        }
        Ok(Dataset {
            ids,
            features,
            targets,
        })
    }

    /// Rows `subset` of a full-follower target vector.
    pub fn from_subset(features: &FollowerFeatures, targets: &[f64], subset: &[usize]) -> Self {
        Dataset {
            ids: subset.to_vec(),
            features: subset.iter().map(|&s| features.get(s).to_vec()).collect(),
            targets: subset.iter().map(|&s| targets[s]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub ids: Vec<usize>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub k: usize,
}

impl KnnModel {
    pub fn fit(data: &Dataset, k: usize) -> Result<Self, PredictError> {
        if data.is_empty() {
            return Err(PredictError::Empty);
        }
        if k == 0 || k > data.len() {
            return Err(PredictError::BadK { k, n: data.len() });
        }
        Ok(KnnModel {
            ids: data.ids.clone(),
            features: data.features.clone(),
            targets: data.targets.clone(),
            k,
        })
    }

    /// Mean target over the k nearest training points; distance ties go to
    /// the lower follower id.
    pub fn predict(&self, f: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(j, x)| (euclidean(f, x), self.ids[j], j))
            .collect();
        d.sort_by(|a, b| cmp_dist_id((a.0, a.1), (b.0, b.1)));
        d.iter().take(self.k).map(|x| self.targets[x.2]).sum::<f64>() / self.k as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Ols,
    /// `(1 / 2n) ||y - Xw - b||² + α ||w||₁`
    Lasso { alpha: f64 },
    /// `||y - Xw - b||² + α ||w||²`
    Ridge { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub family: Family,
    pub w: Vec<f64>,
    pub intercept: f64,
    pub fit_intercept: bool,
    pub l1_bound: Option<f64>,
}

impl LinearModel {
    pub fn predict(&self, f: &[f64]) -> f64 {
        self.intercept + self.w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }
}

const LASSO_TOL: f64 = 1e-8;
const LASSO_MAX_SWEEPS: usize = 100_000;

/// Fits a linear model; the intercept (if any) is handled by centering and
/// is never penalized.
pub fn fit_linear(data: &Dataset, family: Family, fit_intercept: bool) -> Result<LinearModel, PredictError> {
    let n = data.len();
    if n == 0 {
        return Err(PredictError::Empty);
    }
    let dim = data.features[0].len();
    let (xm, ym) = if fit_intercept {
        let mut xm = vec![0.0; dim];
        for x in &data.features {
            for k in 0..dim {
                xm[k] += x[k] / n as f64;
            }
        }
        (xm, mean(&data.targets))
    } else {
        (vec![0.0; dim], 0.0)
    };
    let x = DMatrix::from_fn(n, dim, |i, k| data.features[i][k] - xm[k]);
    let y = DVector::from_fn(n, |i, _| data.targets[i] - ym);
    let w: Vec<f64> = match family {
        Family::Ols => {
            let svd = x.clone().svd(true, true);
            let sol = svd
                .solve(&y, 1e-12)
                .map_err(|e| PredictError::Numeric(e.to_string()))?;
            sol.iter().copied().collect()
        }
        Family::Ridge { alpha } => {
            let mut a = x.transpose() * &x;
            for k in 0..dim {
                a[(k, k)] += alpha;
            }
            let rhs = x.transpose() * &y;
            let sol = match a.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => a
                    .svd(true, true)
                    .solve(&rhs, 1e-12)
                    .map_err(|e| PredictError::Numeric(e.to_string()))?,
            };
            sol.iter().copied().collect()
        }
        Family::Lasso { alpha } => lasso_cd(&x, &y, alpha),
    };
    let intercept = if fit_intercept {
        ym - w.iter().zip(&xm).map(|(a, b)| a * b).sum::<f64>()
    } else {
        0.0
    };
    Ok(LinearModel {
        family,
        w,
        intercept,
        fit_intercept,
        l1_bound: None,
    })
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Cyclic coordinate descent; stops when the largest coefficient update in a
/// sweep is below the tolerance.
fn lasso_cd(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Vec<f64> {
    let (n, dim) = x.shape();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..dim).map(|k| x.column(k).norm_squared() / nf).collect();
    let mut w = vec![0.0; dim];
    let mut resid = y.clone();
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for k in 0..dim {
            if col_sq[k] == 0.0 {
                continue;
            }
            let col = x.column(k);
            let rho = col.dot(&resid) / nf + col_sq[k] * w[k];
            let new = soft_threshold(rho, alpha) / col_sq[k];
            let delta = new - w[k];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                w[k] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < LASSO_TOL {
            break;
        }
    }
    w
}

/// Σ m_t |pred_t − target_t|.
pub fn l1_loss(predictions: &[f64], targets: &[f64], multiplicities: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(targets)
        .zip(multiplicities)
        .map(|((p, t), m)| m * (p - t).abs())
        .sum()
}

/// Nine-dimensional geometric baseline features, min-max normalized.
pub fn tsp_features(network: &Network) -> FollowerFeatures {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for n in &network.nodes {
        for k in 0..2 {
            lo[k] = lo[k].min(n.coords[k]);
            hi[k] = hi[k].max(n.coords[k]);
        }
    }
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let all = vec![true; network.edges.len()];
    let mut spt: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    let values = network
        .od_pairs
        .iter()
        .map(|od| {
            let o = network.nodes[od.origin].coords;
            let d = network.nodes[od.destination].coords;
            let dist = spt
                .entry(od.origin)
                .or_insert_with(|| dijkstra_all(network, &all, od.origin, f64::INFINITY));
            let t = dist[od.destination];
            vec![
                o[0],
                o[1],
                d[0],
                d[1],
                euclidean(&o, &center),
                euclidean(&d, &center),
                euclidean(&o, &d),
                (o[0] - d[0]).abs() * (o[1] - d[1]).abs(),
                if t.is_finite() { t } else { 0.0 },
            ]
        })
        .collect();
    let mut f = FollowerFeatures::new(values, vec![false; network.n_followers()]);
    f.normalize();
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Linear,
    Lasso,
    Ridge,
}

impl ModelKind {
    pub fn parse(name: &str) -> Option<ModelKind> {
        match name.to_ascii_lowercase().as_str() {
            "knn" => Some(ModelKind::Knn),
            "linear" | "ols" => Some(ModelKind::Linear),
            "lasso" => Some(ModelKind::Lasso),
            "ridge" => Some(ModelKind::Ridge),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Linear => "linear",
            ModelKind::Lasso => "lasso",
            ModelKind::Ridge => "ridge",
        }
    }
}

/// Selected hyperparameter (k for kNN, α for lasso/ridge, unused for OLS)
/// by feature set, budget and impedance preset. Unknown cells fall back to
/// the nearest tabulated budget.
pub fn default_hyperparameter(kind: ModelKind, learned: bool, budget: f64, measure: &str) -> f64 {
    let col = match measure.to_ascii_lowercase().as_str() {
        "exp" => 0,
        "lin" => 1,
        _ => 2,
    };
    let row = [100.0, 300.0, 500.0]
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - budget).abs().total_cmp(&(b.1 - budget).abs()))
        .map(|x| x.0)
        .unwrap_or(0);
    const LASSO_REP: [[f64; 3]; 3] = [[0.004, 0.008, 0.020], [0.004, 0.008, 0.010], [0.004, 0.006, 0.010]];
    const LASSO_TSP: [[f64; 3]; 3] = [[0.006, 0.010, 0.040], [0.008, 0.010, 0.030], [0.007, 0.010, 0.020]];
    const RIDGE_REP: [[f64; 3]; 3] = [[50.0, 60.0, 40.0], [50.0, 40.0, 10.0], [30.0, 20.0, 10.0]];
    const RIDGE_TSP: [[f64; 3]; 3] = [[260.0, 240.0, 140.0], [210.0, 170.0, 170.0], [150.0, 150.0, 150.0]];
    match (kind, learned) {
        (ModelKind::Knn, _) => 1.0,
        (ModelKind::Linear, _) => 0.0,
        (ModelKind::Lasso, true) => LASSO_REP[row][col],
        (ModelKind::Lasso, false) => LASSO_TSP[row][col],
        (ModelKind::Ridge, true) => RIDGE_REP[row][col],
        (ModelKind::Ridge, false) => RIDGE_TSP[row][col],
    }
}

/// Trained predictor of either family.
#[derive(Debug, Clone)]
pub enum Predictor {
    /// precomputed neighbor lists (member ids) per follower
    Knn(Vec<Vec<usize>>),
    Linear(LinearModel),
}

/// Predictions for every follower under targets known on the sample
/// members; members get their own target.
pub fn predict_all(
    kind: ModelKind,
    hyper: f64,
    sample: &Sample,
    knn_sample: Option<&Sample>,
    features: &FollowerFeatures,
    targets: &[f64],
) -> Result<Vec<f64>, PredictError> {
    match kind {
        ModelKind::Knn => {
            let s = knn_sample.unwrap_or(sample);
            Ok((0..features.len())
                .map(|i| {
                    let near = &s.assignment[i];
                    if near.is_empty() {
                        targets[i]
                    } else {
                        near.iter().map(|&t| targets[t]).sum::<f64>() / near.len() as f64
                    }
                })
                .collect())
        }
        _ => {
            let family = match kind {
                ModelKind::Linear => Family::Ols,
                ModelKind::Lasso => Family::Lasso { alpha: hyper },
                _ => Family::Ridge { alpha: hyper },
            };
            let data = Dataset::from_subset(features, targets, &sample.members);
            let model = fit_linear(&data, family, true)?;
            let member = sample.is_member();
            Ok((0..features.len())
                .map(|i| if member[i] { targets[i] } else { model.predict(features.get(i)) })
                .collect())
        }
    }
}

/// Mean absolute error over followers outside the sample.
pub fn test_mae(predictions: &[f64], targets: &[f64], sample: &Sample) -> f64 {
    let member = sample.is_member();
    let errs: Vec<f64> = (0..targets.len())
        .filter(|&i| !member[i])
        .map(|i| (predictions[i] - targets[i]).abs())
        .collect();
    mean(&errs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// overrides the tabulated default
    pub hyper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Config {
    pub budgets: Vec<f64>,
    pub measures: Vec<String>,
    pub n_designs: usize,
    /// sample sizes as fractions of |S|
    pub sizes: Vec<f64>,
    pub samplers: Vec<Method>,
    pub models: Vec<ModelSpec>,
    pub seeds: Vec<u64>,
    pub p_max: usize,
    pub vap: VapParams,
    pub n_repeat: usize,
}

impl Default for Exp1Config {
    fn default() -> Self {
        Exp1Config {
            budgets: vec![100.0, 300.0, 500.0],
            measures: vec!["exp".into(), "lin".into(), "rec".into()],
            n_designs: 100,
            sizes: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            samplers: vec![Method::Uni, Method::Med, Method::Cen],
            models: [ModelKind::Knn, ModelKind::Linear, ModelKind::Lasso, ModelKind::Ridge]
                .into_iter()
                .map(|kind| ModelSpec { kind, hyper: None })
                .collect(),
            seeds: (0..10).collect(),
            p_max: 25,
            vap: VapParams::default(),
            n_repeat: 200,
        }
    }
}

/// One feature set under evaluation; `learned` selects the hyperparameter
/// table.
pub struct FeatureSet<'a> {
    pub name: String,
    pub features: &'a FollowerFeatures,
    pub learned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Row {
    pub budget: f64,
    pub measure: String,
    pub features: String,
    pub sampler: String,
    pub model: String,
    pub size: f64,
    pub seed: u64,
    /// median over datasets of the test MAE
    pub mae_median: f64,
    /// mean over datasets of the test MAE
    pub mae_mean: f64,
}

/// Sample size for fraction `frac` of `n` followers (at least one).
pub fn sample_size(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).round() as usize).clamp(1, n.max(1))
}

/// Per-seed test MAEs for the full factorial of the configuration. UNI
/// samples are shared by all feature sets (paired seeds); MED and CEN are
/// computed on each feature set.
pub fn experiment1(
    network: &Network,
    feature_sets: &[FeatureSet<'_>],
    config: &Exp1Config,
) -> Result<Vec<Exp1Row>, PredictError> {
    let n = network.n_followers();
    let mut rows = Vec::new();
    let shared_mask: Vec<bool> = (0..n)
        .map(|s| feature_sets.iter().any(|fs| fs.features.unembedded[s]))
        .collect();
    let mut pool_feats = FollowerFeatures::new(vec![vec![0.0]; n], shared_mask);
    pool_feats.dim = 1;
    for (bi, &budget) in config.budgets.iter().enumerate() {
        let designs = sample_feasible_designs(
            network,
            config.n_designs,
            &Budget::edge_only(budget),
            config.p_max.min(network.n_projects()),
            0,
            mix_seed(0xE1, bi as u64, budget.to_bits()),
        )?;
        let masks: Vec<Vec<bool>> = designs.iter().map(|d| traversable(network, d)).collect();
        let oracle = FollowerOracle::all(network, 60.0);
        let times: Vec<Vec<f64>> = masks.iter().map(|m| oracle.times_masked(network, m)).collect();
        for measure in &config.measures {
            let imp = ImpedanceSpec::preset(measure).map_err(|e| PredictError::Numeric(e.to_string()))?;
            let targets: Vec<Vec<f64>> = if imp.t2 == 60.0 {
                times.iter().map(|t| t.iter().map(|&x| imp.g(x)).collect()).collect()
            } else {
                let o = FollowerOracle::all(network, imp.t2);
                masks
                    .iter()
                    .map(|m| o.times_masked(network, m).into_iter().map(|x| imp.g(x)).collect())
                    .collect()
            };
            for &size in &config.sizes {
                let p = sample_size(n, size);
                for &seed in &config.seeds {
                    let uni = uniform_sample(&pool_feats, p, 1, mix_seed(seed, 0x11, p as u64))?;
                    for fs in feature_sets {
                        for &method in &config.samplers {
                            let base = match method {
                                Method::Uni | Method::Fixed => fixed_sample(fs.features, uni.members.clone(), 1)?,
                                Method::Med => {
                                    vap_median_sample(fs.features, p, 1, &config.vap, mix_seed(seed, 0x22, p as u64))?.sample
                                }
                                Method::Cen => {
                                    p_center_sample(fs.features, p, 1, config.n_repeat, mix_seed(seed, 0x33, p as u64))?.sample
                                }
                            };
                            for spec in &config.models {
                                let hyper = spec.hyper.unwrap_or_else(|| {
                                    default_hyperparameter(spec.kind, fs.learned, budget, measure)
                                });
                                let knn = if spec.kind == ModelKind::Knn {
                                    let k = (hyper.round() as usize).clamp(1, p);
                                    Some(base.with_k(fs.features, k)?)
                                } else {
                                    None
                                };
                                let maes = targets
                                    .iter()
                                    .map(|t| {
                                        let pred = predict_all(spec.kind, hyper, &base, knn.as_ref(), fs.features, t)?;
                                        Ok(test_mae(&pred, t, &base))
                                    })
                                    .collect::<Result<Vec<f64>, PredictError>>()?;
                                rows.push(Exp1Row {
                                    budget,
                                    measure: measure.clone(),
                                    features: fs.name.clone(),
                                    sampler: method.tag().to_string(),
                                    model: spec.kind.tag().to_string(),
                                    size,
                                    seed,
                                    mae_median: median(&maes),
                                    mae_mean: mean(&maes),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Summary {
    pub budget: f64,
    pub measure: String,
    pub features: String,
    pub sampler: String,
    pub model: String,
    pub size: f64,
    pub n_seeds: usize,
    pub mae_median: f64,
    pub mae_mean: f64,
}

/// Aggregates per-seed rows: median of per-seed medians, mean of per-seed
/// means. Output is sorted by key.
pub fn summarize_exp1(rows: &[Exp1Row]) -> Vec<Exp1Summary> {
    let mut groups: std::collections::BTreeMap<(u64, String, String, String, String, u64), Vec<&Exp1Row>> =
        Default::default();
    for r in rows {
        groups
            .entry((
                r.budget.to_bits(),
                r.measure.clone(),
                r.features.clone(),
                r.sampler.clone(),
                r.model.clone(),
                r.size.to_bits(),
            ))
            .or_default()
            .push(r);
    }
    let mut out: Vec<Exp1Summary> = groups
        .into_values()
        .map(|g| {
            let med: Vec<f64> = g.iter().map(|r| r.mae_median).collect();
            let mea: Vec<f64> = g.iter().map(|r| r.mae_mean).collect();
            let r = g[0];
            Exp1Summary {
                budget: r.budget,
                measure: r.measure.clone(),
                features: r.features.clone(),
                sampler: r.sampler.clone(),
                model: r.model.clone(),
                size: r.size,
                n_seeds: g.len(),
                mae_median: median(&med),
                mae_mean: mean(&mea),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.budget
            .total_cmp(&b.budget)
            .then_with(|| a.measure.cmp(&b.measure))
            .then_with(|| a.features.cmp(&b.features))
            .then_with(|| a.sampler.cmp(&b.sampler))
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.size.total_cmp(&b.size))
    });
    out
}

/// Targets of all followers under `design`.
pub fn follower_targets(network: &Network, design: &Design, impedance: &ImpedanceSpec) -> Vec<f64> {
    FollowerOracle::all(network, impedance.t2).accessibilities(network, design, impedance)
}
