//! Follower subset selection and the k-nearest assignment of unsampled
//! followers to sampled ones.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::FollowerFeatures;
use crate::util::{cmp_dist_id, euclidean, mix_seed};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("feature dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("sample size {p} exceeds the {available} selectable followers")]
    TooLarge { p: usize, available: usize },
    #[error("k = {k} must lie in 1..=p (p = {p})")]
    BadK { k: usize, p: usize },
    #[error("sample size must be positive")]
    Empty,
    #[error("sample references unknown follower {0}")]
    UnknownFollower(usize),
    #[error("malformed sample file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Uni,
    Med,
    Cen,
    /// members given explicitly
    Fixed,
}

impl Method {
    pub fn parse(name: &str) -> Option<Method> {
        match name.to_ascii_lowercase().as_str() {
            "uni" => Some(Method::Uni),
            "med" => Some(Method::Med),
            "cen" => Some(Method::Cen),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Uni => "UNI",
            Method::Med => "MED",
            Method::Cen => "CEN",
            Method::Fixed => "FIXED",
        }
    }
}

/// A sampled follower set `T` with its k-nearest assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub members: Vec<usize>,
    pub method: Method,
    pub k: usize,
    /// For every follower outside `T`, the `k` nearest members (follower
    /// ids, nearest first); empty for members.
    pub assignment: Vec<Vec<usize>>,
    /// `m_t`: how many outside followers list `members[j]`, aligned with
    /// `members`.
    pub multiplicity: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    method: Method,
    k: usize,
    members: Vec<usize>,
    multiplicity: Vec<usize>,
}

impl Sample {
    pub fn p(&self) -> usize {
        self.members.len()
    }

    pub fn n_followers(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_member(&self) -> Vec<bool> {
        let mut v = vec![false; self.assignment.len()];
        for &t in &self.members {
            v[t] = true;
        }
        v
    }

    /// Followers outside `T`, ascending.
    pub fn outside(&self) -> Vec<usize> {
        let m = self.is_member();
        (0..m.len()).filter(|&s| !m[s]).collect()
    }

    /// Position of each member within `members`, by follower id.
    pub fn positions(&self) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.assignment.len()];
        for (j, &t) in self.members.iter().enumerate() {
            pos[t] = Some(j);
        }
        pos
    }

    /// Recomputes the assignment for a different `k`.
    pub fn with_k(&self, features: &FollowerFeatures, k: usize) -> Result<Sample, SamplerError> {
        build_sample(features, self.members.clone(), self.method, k)
    }

    pub fn to_json(&self) -> String {
        let f = SampleFile {
            method: self.method,
            k: self.k,
            members: self.members.clone(),
            multiplicity: self.multiplicity.clone(),
        };
        let mut s = serde_json::to_string_pretty(&f).expect("sample serializes");
        s.push('\n');
        s
    }

    pub fn from_json(features: &FollowerFeatures, text: &str) -> Result<Sample, SamplerError> {
        let f: SampleFile =
            serde_json::from_str(text).map_err(|e| SamplerError::Format(e.to_string()))?;
        build_sample(features, f.members, f.method, f.k)
    }
}

pub fn d_f(a: &[f64], b: &[f64]) -> Result<f64, SamplerError> {
    if a.len() != b.len() {
        return Err(SamplerError::Dimension(a.len(), b.len()));
    }
    Ok(euclidean(a, b))
}

/// k nearest members for every non-member; ties go to the lower id.
pub fn knn_assign(
    features: &FollowerFeatures,
    members: &[usize],
    k: usize,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = features.len();
    let mut is_member = vec![false; n];
    let mut pos = vec![usize::MAX; n];
    for (j, &t) in members.iter().enumerate() {
        is_member[t] = true;
        pos[t] = j;
    }
    let mut multiplicity = vec![0; members.len()];
    let mut assignment = vec![Vec::new(); n];
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(members.len());
    for s in 0..n {
        if is_member[s] {
            continue;
        }
        cand.clear();
        cand.extend(
            members
                .iter()
                .map(|&t| (euclidean(features.get(s), features.get(t)), t)),
        );
        let kk = k.min(cand.len());
        if kk < cand.len() {
            cand.select_nth_unstable_by(kk, |a, b| cmp_dist_id(*a, *b));
        }
        cand[..kk].sort_by(|a, b| cmp_dist_id(*a, *b));
        assignment[s] = cand[..kk].iter().map(|&(_, t)| t).collect();
        for &t in &assignment[s] {
            multiplicity[pos[t]] += 1;
        }
    }
    (assignment, multiplicity)
}

fn build_sample(
    features: &FollowerFeatures,
    members: Vec<usize>,
    method: Method,
    k: usize,
) -> Result<Sample, SamplerError> {
    let p = members.len();
    if p == 0 {
        return Err(SamplerError::Empty);
    }
    if k == 0 || k > p {
        return Err(SamplerError::BadK { k, p });
    }
    let mut seen = vec![false; features.len()];
    for &t in &members {
        if t >= features.len() || seen[t] {
            return Err(SamplerError::UnknownFollower(t));
        }
        seen[t] = true;
    }
    let (assignment, multiplicity) = knn_assign(features, &members, k);
    Ok(Sample {
        members,
        method,
        k,
        assignment,
        multiplicity,
    })
}

/// Sample with explicitly chosen members.
pub fn fixed_sample(
    features: &FollowerFeatures,
    members: Vec<usize>,
    k: usize,
) -> Result<Sample, SamplerError> {
    build_sample(features, members, Method::Fixed, k)
}

fn selectable(features: &FollowerFeatures) -> Vec<usize> {
    (0..features.len())
        .filter(|&s| !features.unembedded[s])
        .collect()
}

fn check_p(features: &FollowerFeatures, p: usize) -> Result<Vec<usize>, SamplerError> {
    if p == 0 {
        return Err(SamplerError::Empty);
    }
    let pool = selectable(features);
    if p > pool.len() {
        return Err(SamplerError::TooLarge {
            p,
            available: pool.len(),
        });
    }
    Ok(pool)
}

/// Uniform sampling without replacement among embedded followers.
pub fn uniform_sample(
    features: &FollowerFeatures,
    p: usize,
    k: usize,
    seed: u64,
) -> Result<Sample, SamplerError> {
    let pool = check_p(features, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members: Vec<usize> = pool.choose_multiple(&mut rng, p).copied().collect();
    members.sort_unstable();
    build_sample(features, members, Method::Uni, k)
}

/// Vector-assignment p-median objective: Σ over non-members of the
/// distances to their k nearest members.
pub fn vap_objective(features: &FollowerFeatures, members: &[usize], k: usize) -> f64 {
    let n = features.len();
    let mut is_member = vec![false; n];
    for &t in members {
        is_member[t] = true;
    }
    let mut total = 0.0;
    let mut d: Vec<(f64, usize)> = Vec::with_capacity(members.len());
    for s in 0..n {
        if is_member[s] {
            continue;
        }
        d.clear();
        d.extend(
            members
                .iter()
                .map(|&t| (euclidean(features.get(s), features.get(t)), t)),
        );
        d.sort_by(|a, b| cmp_dist_id(*a, *b));
        total += d.iter().take(k).map(|x| x.0).sum::<f64>();
    }
    total
}

/// Incremental state for swap evaluation: member distance rows and the
/// k+1 nearest members of every non-member.
struct VapState<'a> {
    features: &'a FollowerFeatures,
    k: usize,
    members: Vec<usize>,
    is_member: Vec<bool>,
    rows: Vec<Option<Vec<f64>>>,
    near: Vec<Vec<(f64, usize)>>,
    ksum: Vec<f64>,
    kth: Vec<f64>,
    next: Vec<f64>,
    listed: Vec<Vec<(usize, usize)>>,
    objective: f64,
}

impl<'a> VapState<'a> {
    fn new(features: &'a FollowerFeatures, members: Vec<usize>, k: usize) -> Self {
        let n = features.len();
        let mut st = VapState {
            features,
            k,
            members: Vec::new(),
            is_member: vec![false; n],
            rows: vec![None; n],
            near: vec![Vec::new(); n],
            ksum: vec![0.0; n],
            kth: vec![f64::INFINITY; n],
            next: vec![f64::INFINITY; n],
            listed: vec![Vec::new(); n],
            objective: 0.0,
        };
        for &t in &members {
            st.is_member[t] = true;
            st.rows[t] = Some(st.distance_row(t));
        }
        st.members = members;
        for s in 0..n {
            if !st.is_member[s] {
                st.near[s] = st.nearest_of(s, None);
            }
        }
        st.refresh();
        st.objective = st.total();
        st
    }

    fn refresh(&mut self) {
        for l in &mut self.listed {
            l.clear();
        }
        for s in 0..self.features.len() {
            if self.is_member[s] {
                continue;
            }
            let list = &self.near[s];
            self.ksum[s] = list.iter().take(self.k).map(|x| x.0).sum();
            self.kth[s] = if list.len() >= self.k { list[self.k - 1].0 } else { f64::INFINITY };
            self.next[s] = list.get(self.k).map_or(f64::INFINITY, |x| x.0);
            for (pos, &(_, t)) in list.iter().enumerate().take(self.k) {
                self.listed[t].push((s, pos));
            }
        }
    }

    fn distance_row(&self, t: usize) -> Vec<f64> {
        let ft = self.features.get(t);
        (0..self.features.len())
            .map(|s| euclidean(self.features.get(s), ft))
            .collect()
    }

    /// k+1 nearest current members of `s`, optionally with `extra` swapped in.
    fn nearest_of(&self, s: usize, swap: Option<(usize, usize, &[f64])>) -> Vec<(f64, usize)> {
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(self.members.len() + 1);
        for &t in &self.members {
            if let Some((out, _, _)) = swap {
                if t == out {
                    continue;
                }
            }
            cand.push((self.rows[t].as_ref().expect("member row")[s], t));
        }
        if let Some((_, t_in, row_in)) = swap {
            cand.push((row_in[s], t_in));
        }
        let keep = (self.k + 1).min(cand.len());
        if keep < cand.len() {
            cand.select_nth_unstable_by(keep, |a, b| cmp_dist_id(*a, *b));
            cand.truncate(keep);
        }
        cand.sort_by(|a, b| cmp_dist_id(*a, *b));
        cand
    }

    fn k_sum(&self, list: &[(f64, usize)]) -> f64 {
        list.iter().take(self.k).map(|x| x.0).sum()
    }

    fn total(&self) -> f64 {
        (0..self.features.len())
            .filter(|&s| !self.is_member[s])
            .map(|s| self.k_sum(&self.near[s]))
            .sum()
    }

    /// Objective after swapping `t_out` (member) for `t_in` (non-member).
    fn swap_objective(&self, t_out: usize, t_in: usize, row_in: &[f64]) -> f64 {
        let mut total = self.k_sum(&self.nearest_of(t_out, Some((t_out, t_in, row_in))));
        for s in 0..self.features.len() {
            if self.is_member[s] || s == t_in {
                continue;
            }
            total += self.ksum[s] - (self.kth[s] - row_in[s]).max(0.0);
        }
        for &(s, pos) in &self.listed[t_out] {
            if s == t_in {
                continue;
            }
            total -= self.ksum[s] - (self.kth[s] - row_in[s]).max(0.0);
            total += self.ksum[s] - self.near[s][pos].0 + row_in[s].min(self.next[s]);
        }
        total
    }

    fn apply_swap(&mut self, t_out: usize, t_in: usize, row_in: Vec<f64>, objective: f64) {
        let j = self
            .members
            .iter()
            .position(|&t| t == t_out)
            .expect("member");
        self.members[j] = t_in;
        self.is_member[t_out] = false;
        self.is_member[t_in] = true;
        self.rows[t_out] = None;
        self.rows[t_in] = Some(row_in);
        self.near[t_in].clear();
        for s in 0..self.features.len() {
            if self.is_member[s] {
                continue;
            }
            if s == t_out || self.near[s].iter().any(|x| x.1 == t_out) {
                self.near[s] = self.nearest_of(s, None);
            } else {
                let d = self.rows[t_in].as_ref().expect("row")[s];
                let list = &mut self.near[s];
                list.push((d, t_in));
                list.sort_by(|a, b| cmp_dist_id(*a, *b));
                list.truncate(self.k + 1);
            }
        }
        self.refresh();
        self.objective = objective;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VapParams {
    pub n_iteration: usize,
    pub n_swap: usize,
}

impl Default for VapParams {
    fn default() -> Self {
        VapParams {
            n_iteration: 100,
            n_swap: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VapRun {
    pub sample: Sample,
    pub initial_objective: f64,
    pub objective: f64,
    /// objective after every accepted move
    pub trace: Vec<f64>,
}

const MEDIAN_CANDIDATES: usize = 64;

/// 1-median of `cluster` among `t` and the cluster points nearest the cluster
/// mean, ties to the lower id. Candidates are scanned by the bound
/// m·|c - mean| <= Σ|c - l|.
fn cluster_median(features: &FollowerFeatures, cluster: &[usize], t: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    let dim = features.get(t).len();
    let m = cluster.len() as f64;
    let mut mean = vec![0.0; dim];
    for &l in cluster {
        for (a, b) in mean.iter_mut().zip(features.get(l)) {
            *a += b / m;
        }
    }
    let mut cands: Vec<(f64, usize)> = cluster
        .iter()
        .chain(std::iter::once(&t))
        .filter(|&&c| !features.unembedded[c])
        .map(|&c| (m * euclidean(features.get(c), &mean), c))
        .collect();
    cands.sort_by(|a, b| cmp_dist_id(*a, *b));
    if let Some(i) = cands.iter().position(|x| x.1 == t) {
        if i >= MEDIAN_CANDIDATES {
            let own = cands.remove(i);
            cands.truncate(MEDIAN_CANDIDATES);
            cands.push(own);
        }
    }
    cands.truncate(MEDIAN_CANDIDATES + 1);
    for (bound, c) in cands {
        if bound > best.0 * (1.0 + 1e-9) + 1e-12 {
            break;
        }
        let fc = features.get(c);
        let mut cost = 0.0;
        for &l in cluster {
            cost += euclidean(fc, features.get(l));
            if cost > best.0 {
                break;
            }
        }
        if cmp_dist_id((cost, c), best).is_lt() {
            best = (cost, c);
        }
    }
    best
}

/// Swap/alternation meta-heuristic for the vector-assignment p-median
/// problem, started from a uniform random subset.
pub fn vap_median_sample(
    features: &FollowerFeatures,
    p: usize,
    k: usize,
    params: &VapParams,
    seed: u64,
) -> Result<VapRun, SamplerError> {
    let pool = check_p(features, p)?;
    if k == 0 || k > p {
        return Err(SamplerError::BadK { k, p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init: Vec<usize> = pool.choose_multiple(&mut rng, p).copied().collect();
    init.sort_unstable();
    let mut st = VapState::new(features, init, k);
    let initial_objective = st.objective;
    let mut trace = vec![st.objective];
    let mut alternated_from: Option<Vec<usize>> = None;
    for _ in 0..params.n_iteration {
        let outside: Vec<usize> = pool.iter().copied().filter(|&s| !st.is_member[s]).collect();
        if !outside.is_empty() {
            for _ in 0..params.n_swap {
                let t_out = st.members[rng.gen_range(0..p)];
                let t_in = outside[rng.gen_range(0..outside.len())];
                if st.is_member[t_in] {
                    continue;
                }
                let row_in = st.distance_row(t_in);
                let obj = st.swap_objective(t_out, t_in, &row_in);
                if obj < st.objective - 1e-12 * (1.0 + st.objective.abs()) {
                    st.apply_swap(t_out, t_in, row_in, obj);
                    trace.push(obj);
                }
            }
        }
        // alternation: 1-median of each member's cluster
        if alternated_from.as_ref() == Some(&st.members) {
            continue;
        }
        alternated_from = Some(st.members.clone());
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); features.len()];
        for s in 0..features.len() {
            if !st.is_member[s] {
                for &(_, t) in st.near[s].iter().take(k) {
                    clusters[t].push(s);
                }
            }
        }
        let mut next: Vec<usize> = Vec::with_capacity(p);
        let mut taken = vec![false; features.len()];
        for &t in &st.members {
            let best = cluster_median(features, &clusters[t], t);
            let pick = if best.1 == usize::MAX || taken[best.1] {
                t
            } else {
                best.1
            };
            taken[pick] = true;
            next.push(pick);
        }
        if next != st.members {
            let mut sorted = next.clone();
            sorted.sort_unstable();
            let candidate = VapState::new(features, sorted, k);
            if candidate.objective < st.objective - 1e-12 * (1.0 + st.objective.abs()) {
                st = candidate;
                trace.push(st.objective);
                alternated_from = None;
            }
        }
    }
    let mut members = st.members.clone();
    members.sort_unstable();
    let objective = st.objective;
    let sample = build_sample(features, members, Method::Med, k)?;
    Ok(VapRun {
        sample,
        initial_objective,
        objective,
        trace,
    })
}

/// Farthest-point greedy from `start`; returns members in selection order
/// and the p-center radius.
pub fn greedy_farthest(features: &FollowerFeatures, p: usize, start: usize) -> (Vec<usize>, f64) {
    let n = features.len();
    let mut members = vec![start];
    let mut is_member = vec![false; n];
    is_member[start] = true;
    let mut dmin: Vec<f64> = (0..n)
        .map(|s| euclidean(features.get(s), features.get(start)))
        .collect();
    while members.len() < p {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for s in 0..n {
            if is_member[s] || features.unembedded[s] {
                continue;
            }
            // farthest first; lower id on ties
            if dmin[s] > best.0 || (dmin[s] == best.0 && s < best.1) {
                best = (dmin[s], s);
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let t = best.1;
        members.push(t);
        is_member[t] = true;
        let ft = features.get(t);
        for s in 0..n {
            let d = euclidean(features.get(s), ft);
            if d < dmin[s] {
                dmin[s] = d;
            }
        }
    }
    let radius = (0..n)
        .filter(|&s| !is_member[s])
        .map(|s| dmin[s])
        .fold(0.0, f64::max);
    (members, radius)
}

pub fn p_center_radius(features: &FollowerFeatures, members: &[usize]) -> f64 {
    let n = features.len();
    let mut is_member = vec![false; n];
    for &t in members {
        is_member[t] = true;
    }
    (0..n)
        .filter(|&s| !is_member[s])
        .map(|s| {
            members
                .iter()
                .map(|&t| euclidean(features.get(s), features.get(t)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct CenterRun {
    pub sample: Sample,
    pub radius: f64,
}

/// Best of `n_repeat` farthest-point greedy runs from random starts.
pub fn p_center_sample(
    features: &FollowerFeatures,
    p: usize,
    k: usize,
    n_repeat: usize,
    seed: u64,
) -> Result<CenterRun, SamplerError> {
    let pool = check_p(features, p)?;
    if k == 0 || k > p {
        return Err(SamplerError::BadK { k, p });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..n_repeat.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64, 0));
        let start = pool[rng.gen_range(0..pool.len())];
        let (members, radius) = greedy_farthest(features, p, start);
        if best.as_ref().is_none_or(|(b, _)| radius < *b) {
            best = Some((radius, members));
        }
    }
    let (radius, mut members) = best.expect("at least one run");
    members.sort_unstable();
    Ok(CenterRun {
        sample: build_sample(features, members, Method::Cen, k)?,
        radius,
    })
}

/// `r_t = q_t + Σ_{s ∉ T, t ∈ T_k(s)} q_s / k`, aligned with `members`.
pub fn assignment_weights(sample: &Sample, q: &[f64]) -> Vec<f64> {
    let pos = sample.positions();
    let mut r: Vec<f64> = sample.members.iter().map(|&t| q[t]).collect();
    for (s, near) in sample.assignment.iter().enumerate() {
        if near.is_empty() {
            continue;
        }
        let share = q[s] / near.len() as f64;
        for &t in near {
            r[pos[t].expect("assigned to a member")] += share;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(points: &[&[f64]]) -> FollowerFeatures {
        FollowerFeatures::new(
            points.iter().map(|p| p.to_vec()).collect(),
            vec![false; points.len()],
        )
    }

    fn random_feats(n: usize, dim: usize, seed: u64) -> FollowerFeatures {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FollowerFeatures::new(
            (0..n)
                .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
                .collect(),
            vec![false; n],
        )
    }

    #[test]
    fn distance_basics() {
        assert_eq!(d_f(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(d_f(&[1.0], &[1.0]).unwrap(), 0.0);
        assert!(d_f(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn uniform_edge_cases() {
        let f = random_feats(10, 2, 0);
        let all = uniform_sample(&f, 10, 1, 3).unwrap();
        assert!(all.assignment.iter().all(|a| a.is_empty()));
        let one = uniform_sample(&f, 1, 1, 3).unwrap();
        assert_eq!(one.multiplicity, vec![9]);
        assert!(uniform_sample(&f, 11, 1, 0).is_err());
    }

    #[test]
    fn weights_conserve_mass() {
        let f = feats(&[&[0.0], &[1.0], &[2.0]]);
        let s = fixed_sample(&f, vec![0], 1).unwrap();
        assert_eq!(assignment_weights(&s, &[1.0, 1.0, 1.0]), vec![3.0]);
        let f = random_feats(40, 3, 1);
        let q: Vec<f64> = (0..40).map(|i| 1.0 + (i % 7) as f64).collect();
        for k in 1..=4 {
            let s = uniform_sample(&f, 6, k, 2).unwrap();
            let r = assignment_weights(&s, &q);
            let a: f64 = r.iter().sum();
            let b: f64 = q.iter().sum();
            assert!((a - b).abs() < 1e-9);
            assert_eq!(s.multiplicity.iter().sum::<usize>(), k * 34);
        }
    }

    #[test]
    fn equidistant_tie_goes_to_lower_id() {
        let f = feats(&[&[-1.0], &[0.0], &[1.0]]);
        let s = fixed_sample(&f, vec![2, 0], 1).unwrap();
        assert_eq!(s.assignment[1], vec![0]);
    }

    #[test]
    fn two_clusters_one_median_each() {
        let f = feats(&[&[0.0, 0.0], &[0.1, 0.0], &[5.0, 5.0], &[5.1, 5.0]]);
        let run = vap_median_sample(&f, 2, 1, &VapParams::default(), 4).unwrap();
        let m = &run.sample.members;
        assert!(m[0] < 2 && m[1] >= 2, "{m:?}");
        assert!((run.objective - 0.2).abs() < 1e-9);
    }

    #[test]
    fn full_sample_zero_objective() {
        let f = random_feats(6, 2, 5);
        let run = vap_median_sample(&f, 6, 2, &VapParams::default(), 0).unwrap();
        assert_eq!(run.objective, 0.0);
        let c = p_center_sample(&f, 6, 1, 5, 0).unwrap();
        assert_eq!(c.radius, 0.0);
    }

    #[test]
    fn incremental_objective_matches_scratch() {
        let f = random_feats(80, 4, 6);
        for k in [1, 3] {
            let run = vap_median_sample(
                &f,
                8,
                k,
                &VapParams {
                    n_iteration: 5,
                    n_swap: 50,
                },
                1,
            )
            .unwrap();
            let direct = vap_objective(&f, &run.sample.members, k);
            assert!(
                (direct - run.objective).abs() < 1e-9,
                "{direct} vs {}",
                run.objective
            );
            assert!(run.objective <= run.initial_objective);
            assert!(run.trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn collinear_greedy_trace() {
        let f = feats(&[&[0.0], &[1.0], &[10.0]]);
        let (m, r) = greedy_farthest(&f, 2, 0);
        assert_eq!(m, vec![0, 2]);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn unembedded_never_selected() {
        let mut f = random_feats(30, 2, 7);
        for s in 0..10 {
            f.unembedded[s] = true;
            f.values[s] = vec![0.0, 0.0];
        }
        for seed in 0..5 {
            let u = uniform_sample(&f, 5, 1, seed).unwrap();
            let m = vap_median_sample(
                &f,
                5,
                2,
                &VapParams {
                    n_iteration: 3,
                    n_swap: 30,
                },
                seed,
            )
            .unwrap();
            let c = p_center_sample(&f, 5, 1, 4, seed).unwrap();
            for s in [
                u.members.clone(),
                m.sample.members.clone(),
                c.sample.members.clone(),
            ] {
                assert!(s.iter().all(|&t| t >= 10));
            }
            assert!(m.sample.assignment[0].len() == 2);
        }
        assert!(uniform_sample(&f, 21, 1, 0).is_err());
    }

    #[test]
    fn sample_json_round_trip() {
        let f = random_feats(20, 2, 8);
        let s = uniform_sample(&f, 4, 2, 1).unwrap();
        assert_eq!(Sample::from_json(&f, &s.to_json()).unwrap(), s);
    }

    #[test]
    fn incremental_swap_matches_recomputation() {
        let f = random_feats(40, 3, 5);
        for k in [1, 2, 3, 7, 8] {
            let members: Vec<usize> = (0..40).step_by(5).collect();
            let st = VapState::new(&f, members.clone(), k);
            assert!((st.objective - vap_objective(&f, &members, k)).abs() < 1e-9);
            for (t_out, t_in) in [(0, 1), (10, 11), (35, 39), (20, 3)] {
                let row = st.distance_row(t_in);
                let got = st.swap_objective(t_out, t_in, &row);
                let swapped: Vec<usize> = members.iter().map(|&t| if t == t_out { t_in } else { t }).collect();
                assert!((got - vap_objective(&f, &swapped, k)).abs() < 1e-9, "k={k} swap {t_out}->{t_in}");
            }
        }
    }
}
