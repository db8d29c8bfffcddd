use accessnet::embed::{CostMatrix, FollowerFeatures, RelationshipGraph, WalkConfig};
use accessnet::optimize::{concentration_term, knn_bound, objective_value, reg_bound, BoundParams, ObjectiveSpec};
use accessnet::routing::{Design, FollowerOracle, ImpedanceSpec};
use accessnet::sampler::{assignment_weights, fixed_sample};
use accessnet::{generate_synthetic, GridParams, Network};
use proptest::prelude::*;
use std::sync::OnceLock;

fn small_net() -> &'static Network {
    static NET: OnceLock<Network> = OnceLock::new();
    NET.get_or_init(|| {
        let params = GridParams {
            cells: 2,
            centroids: 12,
            ..Default::default()
        };
        generate_synthetic(5, &params).unwrap()
    })
}

fn features(points: &[Vec<f64>]) -> FollowerFeatures {
    FollowerFeatures::new(points.to_vec(), vec![false; points.len()])
}

fn params(mu: f64, lambda: f64, gamma: f64) -> BoundParams {
    BoundParams { mu, lambda, g_bar: 1.0, q_bar: 3.0, gamma }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_project_never_hurts(bits in prop::collection::vec(any::<bool>(), 12), extra in 0usize..12) {
        let net = small_net();
        let mut d = Design::empty(net);
        for (p, b) in bits.iter().enumerate().take(net.n_projects()) {
            d.projects[p] = *b;
        }
        let extra = extra % net.n_projects();
        let imp = ImpedanceSpec::exp();
        let oracle = FollowerOracle::all(net, imp.t2);
        let before = oracle.accessibilities(net, &d, &imp);
        let after = oracle.accessibilities(net, &d.with_project(extra), &imp);
        for (a, b) in after.iter().zip(&before) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn assignment_weights_conserve_mass(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 6..20),
        q in prop::collection::vec(0.1f64..10.0, 20),
        k in 1usize..4,
    ) {
        let f = features(&pts);
        let n = pts.len();
        let members: Vec<usize> = (0..n).step_by(2).collect();
        let k = k.min(members.len());
        let s = fixed_sample(&f, members, k).unwrap();
        let q = &q[..n];
        let r = assignment_weights(&s, q);
        let total: f64 = q.iter().sum();
        prop_assert!((r.iter().sum::<f64>() - total).abs() < 1e-9 * total);
        let m: usize = s.multiplicity.iter().sum();
        prop_assert_eq!(m, (n - s.p()) * k);
    }

    #[test]
    fn relationship_weights_are_symmetric(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 3..10)) {
        let cm = CostMatrix::from_rows(&rows);
        let g = RelationshipGraph::build(&cm, &WalkConfig::default());
        for s in 0..rows.len() {
            for t in 0..rows.len() {
                prop_assert!((g.weight(s, t) - g.weight(t, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn knn_objective_is_assignment_weighted_member_sum(bits in prop::collection::vec(any::<bool>(), 12), k in 1usize..4, stride in 2usize..5) {
        let net = small_net();
        let n = net.n_followers();
        let pts: Vec<Vec<f64>> = (0..n).map(|s| vec![(s % 7) as f64, (s / 7) as f64]).collect();
        let f = features(&pts);
        let members: Vec<usize> = (0..n).step_by(stride).collect();
        let s = fixed_sample(&f, members.clone(), k).unwrap();
        let mut d = Design::empty(net);
        for (p, b) in bits.iter().enumerate().take(net.n_projects()) {
            d.projects[p] = *b;
        }
        let imp = ImpedanceSpec::exp();
        let g = FollowerOracle::all(net, imp.t2).accessibilities(net, &d, &imp);
        let r = assignment_weights(&s, &net.weights());
        let want: f64 = members.iter().zip(&r).map(|(&t, w)| w * g[t]).sum();
        let got = objective_value(&ObjectiveSpec::knn_aug(imp, s, f, k), &d, net).unwrap();
        prop_assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn bounds_monotone_in_parameters(
        g1 in 0.01f64..0.98, dg in 0.001f64..0.5,
        mu in 0.0f64..3.0, dmu in 0.0f64..2.0,
        lam in 0.0f64..3.0, dlam in 0.0f64..2.0,
        l in 0.0f64..10.0, dl in 0.0f64..5.0,
    ) {
        let g2 = (g1 + dg).min(0.999);
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![3.0], vec![4.5], vec![7.0]];
        let f = features(&pts);
        let s = fixed_sample(&f, vec![0, 3], 1).unwrap();
        let base = params(mu, lam, g1);
        let kb = |p: &BoundParams| knn_bound(&s, &f, 1, p).unwrap().total;
        let rb = |l: f64, p: &BoundParams| reg_bound(&s, &f, l, p).unwrap().total;
        // larger γ means less confidence and a smaller bound
        prop_assert!(kb(&params(mu, lam, g2)) <= kb(&base) + 1e-12);
        prop_assert!(rb(l, &params(mu, lam, g2)) <= rb(l, &base) + 1e-12);
        prop_assert!(kb(&params(mu + dmu, lam, g1)) >= kb(&base) - 1e-12);
        prop_assert!(rb(l, &params(mu + dmu, lam, g1)) >= rb(l, &base) - 1e-12);
        prop_assert!(rb(l, &params(mu, lam + dlam, g1)) >= rb(l, &base) - 1e-12);
        prop_assert!(rb(l + dl, &base) >= rb(l, &base) - 1e-12);
    }
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Distributing n_out·k assignments over p members: every split of the
/// total, and every ordering of it, is no better than the equal split.
#[test]
fn equal_multiplicity_minimizes_concentration() {
    let p = params(1.0, 1.0, 0.05);
    let n_out = 6;
    for k in 1..=2 {
        let total = n_out * k;
        let equal = vec![(total / 3) as f64; 3];
        let best = concentration_term(n_out, &equal, k, &p).unwrap();
        for a in 0..=total {
            for b in 0..=(total - a) {
                let mut m = vec![a, b, total - a - b];
                let mut perms = Vec::new();
                permutations(&mut m, 0, &mut perms);
                for perm in perms {
                    let mf: Vec<f64> = perm.iter().map(|&v| v as f64).collect();
                    let c = concentration_term(n_out, &mf, k, &p).unwrap();
                    assert!(c >= best - 1e-12, "{perm:?} beats the equal split");
                }
            }
        }
    }
}

#[test]
fn permuting_a_multiset_leaves_concentration_unchanged() {
    let p = params(0.5, 1.0, 0.1);
    let mut m = vec![1usize, 4, 2, 7];
    let mut perms = Vec::new();
    permutations(&mut m, 0, &mut perms);
    let first: Vec<f64> = perms[0].iter().map(|&v| v as f64).collect();
    let c0 = concentration_term(14, &first, 1, &p).unwrap();
    for perm in &perms {
        let mf: Vec<f64> = perm.iter().map(|&v| v as f64).collect();
        assert!((concentration_term(14, &mf, 1, &p).unwrap() - c0).abs() < 1e-12);
    }
}
