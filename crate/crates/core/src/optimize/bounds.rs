//! Optimality-gap bounds for the kNN- and regression-augmented models.
//! Values are gap magnitudes and hold for either orientation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OptimizeError;
use crate::embed::FollowerFeatures;
use crate::sampler::Sample;
use crate::util::euclidean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Lipschitz constant of the expected follower cost in feature space
    pub mu: f64,
    /// Lipschitz constant of the prediction model
    pub lambda: f64,
    /// width of the target interval
    pub g_bar: f64,
    /// largest outside-follower weight
    pub q_bar: f64,
    pub gamma: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(OptimizeError::InvalidParam(format!("confidence γ = {} must lie in (0, 1)", self.gamma)));
        }
        for (name, v) in [("mu", self.mu), ("lambda", self.lambda), ("g_bar", self.g_bar), ("q_bar", self.q_bar)] {
            if !(v >= 0.0) {
                return Err(OptimizeError::InvalidParam(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnBound {
    pub bias: f64,
    pub conc: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegBound {
    pub loss: f64,
    pub bias: f64,
    pub conc: f64,
    pub total: f64,
}

/// `sqrt(2 Q̄² Ḡ² [n_out + Σ_t (m_t / k)²] log(1/γ))`
pub fn concentration_term(n_out: usize, m: &[f64], k: usize, params: &BoundParams) -> Result<f64, OptimizeError> {
    params.validate()?;
    if k == 0 {
        return Err(OptimizeError::InvalidParam("k must be positive".into()));
    }
    let kf = k as f64;
    let sq: f64 = m.iter().map(|v| (v / kf) * (v / kf)).sum();
    let inner = 2.0 * params.q_bar * params.q_bar * params.g_bar * params.g_bar * (n_out as f64 + sq) * (1.0 / params.gamma).ln();
    Ok(inner.sqrt())
}

fn with_k(sample: &Sample, features: &FollowerFeatures, k: usize) -> Result<Sample, OptimizeError> {
    if sample.k == k {
        Ok(sample.clone())
    } else {
        Ok(sample.with_k(features, k)?)
    }
}

pub fn knn_bound(sample: &Sample, features: &FollowerFeatures, k: usize, params: &BoundParams) -> Result<KnnBound, OptimizeError> {
    params.validate()?;
    let s = with_k(sample, features, k)?;
    let kf = k as f64;
    let mut dist = 0.0;
    for (i, near) in s.assignment.iter().enumerate() {
        for &t in near {
            dist += euclidean(features.get(i), features.get(t));
        }
    }
    let bias = 2.0 * params.mu * params.q_bar / kf * dist;
    let m: Vec<f64> = s.multiplicity.iter().map(|&v| v as f64).collect();
    let conc = concentration_term(features.len() - s.p(), &m, k, params)?;
    Ok(KnnBound {
        bias,
        conc,
        total: bias + conc,
    })
}

pub fn reg_bound(sample: &Sample, features: &FollowerFeatures, l_bar: f64, params: &BoundParams) -> Result<RegBound, OptimizeError> {
    params.validate()?;
    if !(l_bar >= 0.0) {
        return Err(OptimizeError::InvalidParam("loss bound must be nonnegative".into()));
    }
    let s = with_k(sample, features, 1)?;
    let dist: f64 = s
        .assignment
        .iter()
        .enumerate()
        .filter_map(|(i, near)| near.first().map(|&t| euclidean(features.get(i), features.get(t))))
        .sum();
    let loss = 2.0 * params.q_bar * l_bar;
    let bias = 2.0 * params.q_bar * (params.lambda + params.mu) * dist;
    let m: Vec<f64> = s.multiplicity.iter().map(|&v| v as f64).collect();
    let conc = concentration_term(features.len() - s.p(), &m, 1, params)?;
    Ok(RegBound {
        loss,
        bias,
        conc,
        total: loss + bias + conc,
    })
}

/// Largest weight among followers outside the sample.
pub fn q_bar(sample: &Sample, q: &[f64]) -> f64 {
    let member = sample.is_member();
    q.iter()
        .enumerate()
        .filter(|(s, _)| !member[*s])
        .map(|(_, &v)| v)
        .fold(0.0, f64::max)
}

/// Largest observed `|E[G^s] − E[G^t]| / d(f^s, f^t)` over random pairs,
/// where `mean_targets` estimates each follower's expected cost. This is
/// an empirical estimate, not a certified constant.
pub fn estimate_mu(features: &FollowerFeatures, mean_targets: &[f64], n_pairs: usize, seed: u64) -> f64 {
    let n = features.len();
    if n < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..n_pairs {
        let s = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        let d = euclidean(features.get(s), features.get(t));
        if s != t && d > 1e-12 {
            best = best.max((mean_targets[s] - mean_targets[t]).abs() / d);
        }
    }
    best
}
