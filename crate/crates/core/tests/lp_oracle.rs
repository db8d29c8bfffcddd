use accessnet::lpcore::{solve_lp, DenseLp, LpOutcome, Sense};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every constraint as `a·x <= b`, bounds included.
fn all_rows(lp: &DenseLp) -> Vec<(Vec<f64>, f64)> {
    let n = lp.n_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a_ub.iter().cloned().zip(lp.b_ub.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), lp.upper[j]));
        e[j] = -1.0;
        rows.push((e, -lp.lower[j]));
    }
    rows
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Best objective over all basic feasible points; `None` if none is feasible.
fn vertex_optimum(lp: &DenseLp) -> Option<f64> {
    let n = lp.n_vars();
    let rows = all_rows(lp);
    let mut best: Option<f64> = None;
    combinations(rows.len(), n, &mut |idx| {
        let a = DMatrix::from_fn(n, n, |i, j| rows[idx[i]].0[j]);
        let b = DVector::from_iterator(n, idx.iter().map(|&i| rows[i].1));
        let Some(x) = a.lu().solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) || lp.max_violation(&x) > 1e-9 {
            return;
        }
        let v = lp.objective_at(&x);
        best = Some(match (best, lp.sense) {
            (None, _) => v,
            (Some(b), Sense::Maximize) => b.max(v),
            (Some(b), Sense::Minimize) => b.min(v),
        });
    });
    best
}

fn random_lp(rng: &mut ChaCha8Rng) -> DenseLp {
    let n = rng.gen_range(1..=8);
    let m = rng.gen_range(1..=4);
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut lp = DenseLp::new(sense, c);
    for j in 0..n {
        lp.lower[j] = rng.gen_range(-3.0..0.5);
        lp.upper[j] = lp.lower[j] + rng.gen_range(0.5..4.0);
    }
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let rhs = rng.gen_range(-4.0..6.0);
        if rng.gen_bool(0.25) {
            lp.add_ge(row, rhs);
        } else {
            lp.add_le(row, rhs);
        }
    }
    lp
}

#[test]
fn simplex_matches_vertex_enumeration_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut infeasible = 0;
    for case in 0..50 {
        let lp = random_lp(&mut rng);
        let oracle = vertex_optimum(&lp);
        let got = solve_lp(&lp, 1e-9).unwrap();
        match (oracle, &got) {
            (Some(v), LpOutcome::Optimal { x, objective }) => {
                assert!((v - objective).abs() <= 1e-7 * (1.0 + v.abs()), "case {case}: {objective} vs {v}");
                assert!(lp.max_violation(x) <= 1e-7, "case {case}: infeasible point");
                assert!((lp.objective_at(x) - objective).abs() <= 1e-7);
            }
            (None, LpOutcome::Infeasible) => infeasible += 1,
            _ => panic!("case {case}: oracle {oracle:?}, solver {got:?}"),
        }
    }
    assert!(infeasible < 50);
}

#[test]
fn equality_rows_against_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let mut lp = random_lp(&mut rng);
        let n = lp.n_vars();
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mid: Vec<f64> = (0..n).map(|j| 0.5 * (lp.lower[j] + lp.upper[j])).collect();
        let rhs = row.iter().zip(&mid).map(|(a, b)| a * b).sum::<f64>();
        let mut widened = lp.clone();
        widened.add_le(row.clone(), rhs);
        widened.add_ge(row.clone(), rhs);
        lp.add_eq(row, rhs);
        let oracle = vertex_optimum(&widened);
        let got = solve_lp(&lp, 1e-9).unwrap();
        match (oracle, got.optimal()) {
            (Some(v), Some((_, obj))) => assert!((v - obj).abs() <= 1e-7 * (1.0 + v.abs()), "case {case}"),
            (None, None) => assert_eq!(got, LpOutcome::Infeasible),
            (o, g) => panic!("case {case}: oracle {o:?} solver {g:?}"),
        }
    }
}
