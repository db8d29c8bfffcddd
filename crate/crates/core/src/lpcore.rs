//! Dense two-phase revised simplex for small linear programs.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounds on variable {0}: lower > upper")]
    Bounds(usize),
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `opt c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper`.
/// Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLp {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DenseLp {
    /// Empty problem over `n` nonnegative variables.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        DenseLp {
            sense,
            objective,
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.a_ub.push(row.into_iter().map(|v| -v).collect());
        self.b_ub.push(-rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        let dim = |m: &str| Err(LpError::Dimension(m.to_string()));
        if self.lower.len() != n || self.upper.len() != n {
            return dim("bound vectors must match the objective length");
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return dim("row count differs from rhs length");
        }
        if self.a_ub.iter().chain(&self.a_eq).any(|r| r.len() != n) {
            return dim("constraint row length differs from variable count");
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] {
                return Err(LpError::Bounds(j));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |r: &[f64]| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let mut v: f64 = 0.0;
        for (r, b) in self.a_ub.iter().zip(&self.b_ub) {
            v = v.max(dot(r) - b);
        }
        for (r, b) in self.a_eq.iter().zip(&self.b_eq) {
            v = v.max((dot(r) - b).abs());
        }
        for j in 0..x.len() {
            v = v.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        v
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal { x, objective } => Some((x, *objective)),
            _ => None,
        }
    }
}

/// How an original variable maps onto standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, offset: f64 },
    Flip { col: usize, offset: f64 },
    Split { pos: usize, neg: usize },
}

struct Standard {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// column of a +1 slack usable as an initial basic variable, per row
    slack_basis: Vec<Option<usize>>,
    map: Vec<VarMap>,
    n_struct: usize,
}

fn standardize(lp: &DenseLp) -> Standard {
    let n = lp.n_vars();
    let mut map = Vec::with_capacity(n);
    let mut n_cols = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo.is_finite() {
            map.push(VarMap::Shift {
                col: n_cols,
                offset: lo,
            });
            if hi.is_finite() {
                bound_rows.push((n_cols, hi - lo));
            }
            n_cols += 1;
        } else if hi.is_finite() {
            map.push(VarMap::Flip {
                col: n_cols,
                offset: hi,
            });
            n_cols += 1;
        } else {
            map.push(VarMap::Split {
                pos: n_cols,
                neg: n_cols + 1,
            });
            n_cols += 2;
        }
    }
    let n_struct = n_cols;
    let sign = if lp.sense == Sense::Maximize {
        -1.0
    } else {
        1.0
    };
    let mut c = vec![0.0; n_struct];
    let transform = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; n_struct];
        let mut r = rhs;
        for (j, &a) in row.iter().enumerate() {
            match map[j] {
                VarMap::Shift { col, offset } => {
                    out[col] += a;
                    r -= a * offset;
                }
                VarMap::Flip { col, offset } => {
                    out[col] -= a;
                    r -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        (out, r)
    };
    for (j, &cj) in lp.objective.iter().enumerate() {
        match map[j] {
            VarMap::Shift { col, .. } => c[col] += sign * cj,
            VarMap::Flip { col, .. } => c[col] -= sign * cj,
            VarMap::Split { pos, neg } => {
                c[pos] += sign * cj;
                c[neg] -= sign * cj;
            }
        }
    }
    let mut le_rows: Vec<(Vec<f64>, f64)> = lp
        .a_ub
        .iter()
        .zip(&lp.b_ub)
        .map(|(r, &b)| transform(r, b))
        .collect();
    for &(col, width) in &bound_rows {
        let mut row = vec![0.0; n_struct];
        row[col] = 1.0;
        le_rows.push((row, width));
    }
    let eq_rows: Vec<(Vec<f64>, f64)> = lp
        .a_eq
        .iter()
        .zip(&lp.b_eq)
        .map(|(r, &b)| transform(r, b))
        .collect();
    let n_slack = le_rows.len();
    let total = n_struct + n_slack;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut slack_basis = Vec::new();
    for (k, (mut row, rhs)) in le_rows.into_iter().enumerate() {
        row.resize(total, 0.0);
        let s = n_struct + k;
        row[s] = 1.0;
        if rhs >= 0.0 {
            a.push(row);
            b.push(rhs);
            slack_basis.push(Some(s));
        } else {
            a.push(row.into_iter().map(|v| -v).collect());
            b.push(-rhs);
            slack_basis.push(None);
        }
    }
    for (mut row, rhs) in eq_rows {
        row.resize(total, 0.0);
        if rhs >= 0.0 {
            a.push(row);
            b.push(rhs);
        } else {
            a.push(row.into_iter().map(|v| -v).collect());
            b.push(-rhs);
        }
        slack_basis.push(None);
    }
    c.resize(total, 0.0);
    Standard {
        a,
        b,
        c,
        slack_basis,
        map,
        n_struct,
    }
}

/// Revised simplex state over `min c'x, Ax = b, x >= 0` with an explicit
/// basis inverse.
struct Simplex<'a> {
    a: &'a [Vec<f64>],
    b: &'a [f64],
    m: usize,
    n: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    tol: f64,
    updates: usize,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

const REINVERT_EVERY: usize = 40;
const MAX_ITERATIONS: usize = 100_000;
const DEGENERATE_SWITCH: usize = 25;

impl<'a> Simplex<'a> {
    fn column(&self, j: usize) -> Vec<f64> {
        self.a.iter().map(|r| r[j]).collect()
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        self.binv
            .iter()
            .map(|r| r.iter().zip(col).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn reinvert(&mut self) {
        let m = self.m;
        let bmat = DMatrix::from_fn(m, m, |i, k| self.a[i][self.basis[k]]);
        if let Some(inv) = bmat.lu().try_inverse() {
            self.binv = (0..m)
                .map(|i| (0..m).map(|k| inv[(i, k)]).collect())
                .collect();
            self.xb = self.ftran(self.b);
            for v in &mut self.xb {
                if *v < 0.0 && *v > -self.tol {
                    *v = 0.0;
                }
            }
        }
        self.updates = 0;
    }

    fn pivot(&mut self, row: usize, entering: usize, u: &[f64]) {
        let piv = u[row];
        let theta = self.xb[row] / piv;
        for i in 0..self.m {
            if i != row {
                self.xb[i] -= theta * u[i];
                if self.xb[i].abs() < self.tol * 1e-3 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[row] = theta;
        let prow: Vec<f64> = self.binv[row].iter().map(|v| v / piv).collect();
        for i in 0..self.m {
            if i != row && u[i] != 0.0 {
                let f = u[i];
                for (x, p) in self.binv[i].iter_mut().zip(&prow) {
                    *x -= f * p;
                }
            }
        }
        self.binv[row] = prow;
        self.is_basic[self.basis[row]] = false;
        self.basis[row] = entering;
        self.is_basic[entering] = true;
        self.updates += 1;
        if self.updates >= REINVERT_EVERY {
            self.reinvert();
        }
    }

    /// Runs simplex iterations for cost `c` with columns `allowed`.
    fn optimize(&mut self, c: &[f64], allowed: &[bool]) -> Result<bool, LpError> {
        let mut degenerate_run = 0usize;
        loop {
            match self.step(c, allowed, degenerate_run >= DEGENERATE_SWITCH)? {
                (Step::Optimal, _) => return Ok(true),
                (Step::Unbounded, _) => return Ok(false),
                (Step::Continue, degenerate) => {
                    if degenerate {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                }
            }
        }
    }

    fn step(&mut self, c: &[f64], allowed: &[bool], bland: bool) -> Result<(Step, bool), LpError> {
        self.iterations += 1;
        if self.iterations > MAX_ITERATIONS {
            return Err(LpError::IterationLimit);
        }
        // y' = c_B' B^{-1}
        let mut y = vec![0.0; self.m];
        for (k, &bj) in self.basis.iter().enumerate() {
            let cb = c[bj];
            if cb != 0.0 {
                for (yi, v) in y.iter_mut().zip(&self.binv[k]) {
                    *yi += cb * v;
                }
            }
        }
        let mut entering = None;
        let mut best = -self.tol;
        for j in 0..self.n {
            if self.is_basic[j] || !allowed[j] {
                continue;
            }
            let d = c[j] - (0..self.m).map(|i| y[i] * self.a[i][j]).sum::<f64>();
            if bland {
                if d < -self.tol {
                    entering = Some(j);
                    break;
                }
            } else if d < best {
                best = d;
                entering = Some(j);
            }
        }
        let Some(q) = entering else {
            return Ok((Step::Optimal, false));
        };
        let u = self.ftran(&self.column(q));
        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for i in 0..self.m {
            if u[i] > self.tol {
                let r = self.xb[i].max(0.0) / u[i];
                let better = match leave {
                    None => true,
                    Some(l) => {
                        r < ratio - self.tol
                            || (r <= ratio + self.tol && self.basis[i] < self.basis[l])
                    }
                };
                if better {
                    ratio = ratio.min(r);
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else {
            return Ok((Step::Unbounded, false));
        };
        let degenerate = ratio <= self.tol;
        self.pivot(row, q, &u);
        Ok((Step::Continue, degenerate))
    }
}

/// Solves `lp` to optimality within `tol` (feasibility and reduced-cost
/// tolerance). Dantzig pricing switches to Bland's rule after a run of
/// degenerate pivots, which guarantees termination.
pub fn solve_lp(lp: &DenseLp, tol: f64) -> Result<LpOutcome, LpError> {
    lp.check()?;
    let std = standardize(lp);
    let m = std.a.len();
    let n_real = std.c.len();

    // Phase 1: artificial columns for rows without a usable slack.
    let art_rows: Vec<usize> = (0..m).filter(|&i| std.slack_basis[i].is_none()).collect();
    let n = n_real + art_rows.len();
    let mut a = std.a.clone();
    for row in a.iter_mut() {
        row.resize(n, 0.0);
    }
    let mut basis = vec![0; m];
    for (k, &i) in art_rows.iter().enumerate() {
        a[i][n_real + k] = 1.0;
        basis[i] = n_real + k;
    }
    for i in 0..m {
        if let Some(s) = std.slack_basis[i] {
            basis[i] = s;
        }
    }
    let mut is_basic = vec![false; n];
    for &bj in &basis {
        is_basic[bj] = true;
    }
    let mut sx = Simplex {
        a: &a,
        b: &std.b,
        m,
        n,
        basis,
        is_basic,
        binv: (0..m)
            .map(|i| (0..m).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect(),
        xb: std.b.clone(),
        tol,
        updates: 0,
        iterations: 0,
    };
    let scale = 1.0 + std.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !art_rows.is_empty() {
        let mut c1 = vec![0.0; n];
        for v in c1.iter_mut().skip(n_real) {
            *v = 1.0;
        }
        let allowed = vec![true; n];
        sx.optimize(&c1, &allowed)?;
        sx.reinvert();
        let infeas: f64 = (0..m)
            .filter(|&i| sx.basis[i] >= n_real)
            .map(|i| sx.xb[i])
            .sum();
        if infeas > tol * scale * 10.0 {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining artificials out of the basis where possible.
        for row in 0..m {
            if sx.basis[row] < n_real {
                continue;
            }
            let candidate = (0..n_real).find(|&j| {
                if sx.is_basic[j] {
                    return false;
                }
                let rho: f64 = (0..m).map(|i| sx.binv[row][i] * a[i][j]).sum();
                rho.abs() > 1e-7
            });
            if let Some(j) = candidate {
                let u = sx.ftran(&sx.column(j));
                sx.pivot(row, j, &u);
            }
        }
        sx.reinvert();
    }

    let mut c2 = std.c.clone();
    c2.resize(n, 0.0);
    let mut allowed = vec![true; n];
    for v in allowed.iter_mut().skip(n_real) {
        *v = false;
    }
    if !sx.optimize(&c2, &allowed)? {
        return Ok(LpOutcome::Unbounded);
    }
    sx.reinvert();
    let mut z = vec![0.0; n];
    for (k, &bj) in sx.basis.iter().enumerate() {
        z[bj] = sx.xb[k].max(0.0);
    }
    let x: Vec<f64> = std
        .map
        .iter()
        .map(|vm| match *vm {
            VarMap::Shift { col, offset } => offset + z[col],
            VarMap::Flip { col, offset } => offset - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    debug_assert!(std.n_struct <= n_real);
    let objective = lp.objective_at(&x);
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_upper_bound() {
        let mut lp = DenseLp::new(Sense::Maximize, vec![1.0]);
        lp.add_le(vec![1.0], 5.0);
        let out = solve_lp(&lp, 1e-9).unwrap();
        let (x, obj) = out.optimal().unwrap();
        assert!((x[0] - 5.0).abs() < 1e-12);
        assert!((obj - 5.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut lp = DenseLp::new(Sense::Maximize, vec![1.0]);
        lp.add_le(vec![1.0], 0.0);
        lp.add_ge(vec![1.0], 1.0);
        assert_eq!(solve_lp(&lp, 1e-9).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = DenseLp::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_le(vec![1.0, -1.0], 1.0);
        assert_eq!(solve_lp(&lp, 1e-9).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_and_boxed_variables() {
        // min |x - 3| style: min t s.t. t >= x - 3, t >= 3 - x, x free
        let mut lp = DenseLp::new(Sense::Minimize, vec![0.0, 1.0]);
        lp.lower[0] = f64::NEG_INFINITY;
        lp.add_ge(vec![-1.0, 1.0], -3.0);
        lp.add_ge(vec![1.0, 1.0], 3.0);
        let (x, obj) = solve_lp(&lp, 1e-9)
            .unwrap()
            .optimal()
            .map(|(x, o)| (x.to_vec(), o))
            .unwrap();
        assert!(obj.abs() < 1e-9);
        assert!((x[0] - 3.0).abs() < 1e-9);

        let mut lp = DenseLp::new(Sense::Maximize, vec![1.0, -1.0]);
        lp.lower = vec![-2.0, -4.0];
        lp.upper = vec![1.5, f64::INFINITY];
        let (x, obj) = solve_lp(&lp, 1e-9)
            .unwrap()
            .optimal()
            .map(|(x, o)| (x.to_vec(), o))
            .unwrap();
        assert!((x[0] - 1.5).abs() < 1e-9 && (x[1] + 4.0).abs() < 1e-9);
        assert!((obj - 5.5).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_and_redundancy() {
        let mut lp = DenseLp::new(Sense::Minimize, vec![1.0, 2.0, 3.0]);
        lp.add_eq(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0, 2.0], 2.0);
        let (x, obj) = solve_lp(&lp, 1e-9)
            .unwrap()
            .optimal()
            .map(|(x, o)| (x.to_vec(), o))
            .unwrap();
        assert!((obj - 1.0).abs() < 1e-9);
        assert!(lp.max_violation(&x) < 1e-9);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let mut lp = DenseLp::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.add_le(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&lp, 1e-9), Err(LpError::Dimension(_))));
        let mut lp = DenseLp::new(Sense::Minimize, vec![1.0]);
        lp.lower[0] = 2.0;
        lp.upper[0] = 1.0;
        assert_eq!(solve_lp(&lp, 1e-9), Err(LpError::Bounds(0)));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance under Dantzig with naive ties.
        let mut lp = DenseLp::new(Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let (_, obj) = solve_lp(&lp, 1e-9)
            .unwrap()
            .optimal()
            .map(|(x, o)| (x.to_vec(), o))
            .unwrap();
        assert!((obj + 0.05).abs() < 1e-9, "{obj}");
    }
}
