//! End-to-end acceptance checks. Each test prints a single PASS/FAIL line
//! straight to stdout so the lines survive output capture.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use accessnet::embed::{embed_followers, sample_designs, EmbedConfig, FollowerFeatures, WalkConfig};
use accessnet::harness::{best_of_samples, ExperimentConfig};
use accessnet::lpcore::{solve_lp, DenseLp, LpOutcome, Sense};
use accessnet::netcore::{CrossingRule, Edge, Node, NodeCost, OdPair, Project, Stress};
use accessnet::optimize::{
    algorithm1_knn, budget_for_max_projects, build_milp, concentration_term, draw_sample, encoding_for, exhaustive_solve,
    greedy_expand, inner_fit_raw, knn_bound, local_search_solve, objective_value, optimality_gap, reg_bound, BoundParams,
    Encoding, MethodConfig, ObjectiveSpec,
};
use accessnet::predict::{experiment1, sample_size, tsp_features, Exp1Config, FeatureSet, ModelKind, ModelSpec};
use accessnet::routing::{Budget, Design, FollowerOracle, ImpedanceSpec};
use accessnet::sampler::{fixed_sample, uniform_sample, vap_median_sample, vap_objective, Method, VapParams};
use accessnet::{generate_synthetic, GridParams, Network};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, ok: bool, detail: &str, start: Instant) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {id:>2} {tag}: {name} ({detail}; {:.1}s)\n",
        start.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

/// Runtime limits are per criterion, so the checks run one at a time.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn desk_embed(net: &Network) -> EmbedConfig {
    EmbedConfig {
        n_sim: 300,
        p_max: 25.min(net.n_projects()),
        q_max: 10.min(net.high_stress_nodes().len()),
        walk: WalkConfig {
            n_walk: 10,
            epochs: 2,
            ..Default::default()
        },
        ..Default::default()
    }
}

struct Fixture {
    net: Network,
    rep: FollowerFeatures,
}

/// 6x6 synthetic grid with REP features under EXP.
fn grid6() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let net = generate_synthetic(0, &GridParams::default()).unwrap();
        let rep = embed_followers(&net, &ImpedanceSpec::exp(), &desk_embed(&net), 0).unwrap().features;
        Fixture { net, rep }
    })
}

/// 3x3 arterial intersections, 12 projects.
fn grid3() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let net = generate_synthetic(0, &GridParams::with_cells(2)).unwrap();
        assert_eq!(net.n_projects(), 12);
        let rep = embed_followers(&net, &ImpedanceSpec::exp(), &desk_embed(&net), 0).unwrap().features;
        Fixture { net, rep }
    })
}

#[test]
fn criterion_01_reduction_identity() {
    let _serial = serial();
    let fx = grid6();
    let start = Instant::now();
    let n = fx.net.n_followers();
    let all = fixed_sample(&fx.rep, (0..n).collect(), 1).unwrap();
    let imp = ImpedanceSpec::exp();
    let knn = ObjectiveSpec::knn_aug(imp, all, fx.rep.clone(), 1);
    let exact = ObjectiveSpec::exact(imp);
    let designs = sample_designs(&fx.net, 100, 25, 10, 11).unwrap().designs;
    let worst = designs
        .iter()
        .map(|d| (objective_value(&knn, d, &fx.net).unwrap() - objective_value(&exact, d, &fx.net).unwrap()).abs())
        .fold(0.0, f64::max);
    let ok = designs.len() == 100 && worst <= 1e-9 && start.elapsed().as_secs() < 60;
    report(1, "T = S reduces the kNN-augmented objective to the exact one", ok, &format!("max |diff| {worst:.2e} over 100 designs"), start);
    assert!(ok);
}

#[test]
fn criterion_02_oracle_optimality() {
    let _serial = serial();
    let net = &grid3().net;
    let start = Instant::now();
    let budget = budget_for_max_projects(net, 3);
    let spec = ObjectiveSpec::exact(ImpedanceSpec::exp());
    let opt = exhaustive_solve(&spec, net, &budget).unwrap();
    let mut brute = f64::NEG_INFINITY;
    for mask in 0u32..(1 << net.n_projects()) {
        let mut d = Design::empty(net);
        for p in 0..net.n_projects() {
            d.projects[p] = mask >> p & 1 == 1;
        }
        if d.is_feasible(net, &budget) {
            brute = brute.max(objective_value(&spec, &d, net).unwrap());
        }
    }
    let hits = (0..10u64)
        .filter(|&seed| {
            let r = local_search_solve(&spec, net, &budget, seed, 1).unwrap();
            r.exact_objective >= opt.objective - 1e-9 * opt.objective.abs().max(1.0)
        })
        .count();
    let ok = (opt.objective - brute).abs() <= 1e-9 && hits >= 9 && start.elapsed().as_secs() < 300;
    report(2, "local search attains the enumeration optimum on the 3x3 grid", ok, &format!("optimum {:.4}, hit in {hits}/10 seeds", opt.objective), start);
    assert!(ok);
}

#[test]
fn criterion_03_monotonicity() {
    let _serial = serial();
    let net = &grid6().net;
    let start = Instant::now();
    let imp = ImpedanceSpec::exp();
    let oracle = FollowerOracle::all(net, imp.t2);
    let designs = sample_designs(net, 1000, 25, 10, 3).unwrap().designs;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0usize;
    let mut pairs = 0usize;
    for d in &designs {
        let open: Vec<usize> = (0..net.n_projects()).filter(|&p| !d.projects[p]).collect();
        let Some(&p) = open.choose(&mut rng) else { continue };
        let before = oracle.accessibilities(net, d, &imp);
        let after = oracle.accessibilities(net, &d.with_project(p), &imp);
        violations += after.iter().zip(&before).filter(|(a, b)| a < b).count();
        pairs += 1;
    }
    let ok = pairs == 1000 && violations == 0;
    report(3, "adding a project never lowers any follower's accessibility", ok, &format!("{pairs} pairs, {violations} violations"), start);
    assert!(ok);
}

#[test]
fn criterion_04_impedance_presets() {
    let _serial = serial();
    let start = Instant::now();
    // piecewise values evaluated by hand from the preset constants
    let cases: [(&str, [f64; 4], [f64; 4]); 3] = [
        ("exp", [0.0, 20.0, 40.0, 60.0], [1.0, 0.25, 0.125, 0.0]),
        ("lin", [0.0, 60.0, 60.0, 60.0], [1.0, 0.0, 0.0, 0.0]),
        ("rec", [0.0, 58.0, 59.0, 60.0], [1.0, 0.942, 0.471, 0.0]),
    ];
    let mut worst: f64 = 0.0;
    for (name, taus, want) in cases {
        let imp = ImpedanceSpec::preset(name).unwrap();
        assert_eq!([0.0, imp.t1, 0.5 * (imp.t1 + imp.t2), imp.t2], taus);
        for (t, w) in taus.iter().zip(want) {
            worst = worst.max((imp.accessibility(*t).unwrap() - w).abs());
        }
    }
    let ok = worst <= 1e-12;
    report(4, "impedance presets match hand-evaluated values", ok, &format!("max error {worst:.1e}"), start);
    assert!(ok);
}

#[test]
fn criterion_05_sampling_quality() {
    let _serial = serial();
    let f = &grid6().rep;
    let start = Instant::now();
    let n = f.len();
    let mut failures = Vec::new();
    for frac in [0.01, 0.03, 0.05] {
        let p = sample_size(n, frac);
        let uni: Vec<f64> = (0..10u64)
            .map(|s| vap_objective(f, &uniform_sample(f, p, 1, s).unwrap().members, 1))
            .collect();
        let uni_mean = uni.iter().sum::<f64>() / uni.len() as f64;
        for s in 0..10u64 {
            let med = vap_median_sample(f, p, 1, &VapParams::default(), s).unwrap().objective;
            if med > uni_mean || med > uni[s as usize] {
                failures.push(format!("p={p} seed {s}"));
            }
        }
    }
    let ok = failures.is_empty() && start.elapsed().as_secs() < 120;
    report(5, "p-median samples beat uniform samples on the p-median objective", ok, &format!("{} of 30 seed pairs fail {failures:?}", failures.len()), start);
    assert!(ok);
}

#[test]
fn criterion_06_prediction() {
    let _serial = serial();
    let fx = grid6();
    let start = Instant::now();
    let tsp = tsp_features(&fx.net);
    let sets = [
        FeatureSet { name: "REP".into(), features: &fx.rep, learned: true },
        FeatureSet { name: "TSP".into(), features: &tsp, learned: false },
    ];
    let config = Exp1Config {
        budgets: vec![300.0],
        measures: vec!["exp".into()],
        sizes: vec![0.01],
        samplers: vec![Method::Uni, Method::Med],
        models: vec![ModelSpec { kind: ModelKind::Knn, hyper: None }],
        ..Default::default()
    };
    let rows = experiment1(&fx.net, &sets, &config).unwrap();
    let mae = |feat: &str, sampler: &str, seed: u64| {
        rows.iter()
            .find(|r| r.features == feat && r.sampler == sampler && r.seed == seed)
            .map(|r| r.mae_median)
            .unwrap()
    };
    let med_wins = (0..10).filter(|&s| mae("REP", "MED", s) <= mae("REP", "UNI", s)).count();
    // REP vs TSP compared on the same sampler, seed by seed
    let rep_wins = (0..10).filter(|&s| mae("REP", "UNI", s) <= mae("TSP", "UNI", s)).count();
    let ok = med_wins >= 8 && rep_wins >= 7 && start.elapsed().as_secs() < 600;
    report(6, "kNN prediction: MED beats UNI, REP beats TSP", ok, &format!("MED<=UNI {med_wins}/10, REP<=TSP {rep_wins}/10"), start);
    assert!(ok);
}

#[test]
fn criterion_07_decision_quality() {
    let _serial = serial();
    let fx = grid3();
    let start = Instant::now();
    let imp = ImpedanceSpec::exp();
    let budget = budget_for_max_projects(&fx.net, 3);
    let opt = exhaustive_solve(&ObjectiveSpec::exact(imp), &fx.net, &budget).unwrap().objective;
    let p = sample_size(fx.net.n_followers(), 0.01);
    let mut knn_gaps = Vec::new();
    let mut red_gaps = Vec::new();
    for seed in 0..10u64 {
        let med = MethodConfig { sampler: Method::Med, seed, ..Default::default() };
        let knn = algorithm1_knn(&fx.net, &fx.rep, &imp, p, 2, &budget, &med).unwrap();
        knn_gaps.push(optimality_gap(opt, knn.result.exact_objective));
        let uni = MethodConfig { sampler: Method::Uni, seed, ..Default::default() };
        let s = draw_sample(&fx.rep, p, 1, &uni, 0xA2).unwrap();
        let r = local_search_solve(&ObjectiveSpec::reduced(imp, s), &fx.net, &budget, seed, 1).unwrap();
        red_gaps.push(optimality_gap(opt, r.exact_objective));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (k, r) = (mean(&knn_gaps), mean(&red_gaps));
    let in_range = knn_gaps.iter().chain(&red_gaps).all(|g| (-1e-12..=1.0).contains(g));
    let ok = k <= r && in_range && start.elapsed().as_secs() < 900;
    report(7, "kNN-MED mean gap <= Reduced-UNI mean gap on the 3x3 grid", ok, &format!("p={p}: kNN-MED {k:.4}, Reduced-UNI {r:.4}"), start);
    assert!(ok);
}

fn bound_params(mu: f64, lambda: f64, gamma: f64) -> BoundParams {
    BoundParams { mu, lambda, g_bar: 1.0, q_bar: 1.0, gamma }
}

#[test]
fn criterion_08_bound_formulas() {
    let _serial = serial();
    let start = Instant::now();
    let mut errs = Vec::new();
    // features 0, 1, 3 on a line, T = {0}, log(1/γ) = 1
    let f = FollowerFeatures::new(vec![vec![0.0], vec![1.0], vec![3.0]], vec![false; 3]);
    let s = fixed_sample(&f, vec![0], 1).unwrap();
    let p = bound_params(0.5, 2.0, (-1.0f64).exp());
    let kb = knn_bound(&s, &f, 1, &p).unwrap();
    errs.push((kb.bias - 4.0).abs());
    errs.push((kb.conc - 12.0f64.sqrt()).abs());
    errs.push((kb.total - (4.0 + 12.0f64.sqrt())).abs());
    let rb = reg_bound(&s, &f, 0.25, &p).unwrap();
    errs.push((rb.loss - 0.5).abs());
    errs.push((rb.bias - 20.0).abs());
    errs.push((rb.conc - 12.0f64.sqrt()).abs());
    errs.push((rb.total - (20.5 + 12.0f64.sqrt())).abs());
    let arithmetic = errs.iter().all(|e| *e <= 1e-12);

    let mut monotone = true;
    let grid = [0.0, 0.5, 1.0, 2.0, 4.0];
    let gammas = [0.01, 0.05, 0.1, 0.3, 0.6, 0.9];
    for w in gammas.windows(2) {
        monotone &= knn_bound(&s, &f, 1, &bound_params(1.0, 1.0, w[1])).unwrap().total <= knn_bound(&s, &f, 1, &bound_params(1.0, 1.0, w[0])).unwrap().total;
        monotone &= reg_bound(&s, &f, 1.0, &bound_params(1.0, 1.0, w[1])).unwrap().total <= reg_bound(&s, &f, 1.0, &bound_params(1.0, 1.0, w[0])).unwrap().total;
    }
    for w in grid.windows(2) {
        let base = bound_params(1.0, 1.0, 0.05);
        monotone &= reg_bound(&s, &f, w[1], &base).unwrap().total >= reg_bound(&s, &f, w[0], &base).unwrap().total;
        monotone &= knn_bound(&s, &f, 1, &bound_params(w[1], 1.0, 0.05)).unwrap().total >= knn_bound(&s, &f, 1, &bound_params(w[0], 1.0, 0.05)).unwrap().total;
        monotone &= reg_bound(&s, &f, 1.0, &bound_params(w[1], 1.0, 0.05)).unwrap().total >= reg_bound(&s, &f, 1.0, &bound_params(w[0], 1.0, 0.05)).unwrap().total;
        monotone &= reg_bound(&s, &f, 1.0, &bound_params(1.0, w[1], 0.05)).unwrap().total >= reg_bound(&s, &f, 1.0, &bound_params(1.0, w[0], 0.05)).unwrap().total;
    }

    // 8 outside followers with k = 2 spread over 4 members: the equal split
    // is the minimum among all orderings of every multiset
    let cp = bound_params(1.0, 1.0, 0.05);
    let equal = concentration_term(8, &[4.0; 4], 2, &cp).unwrap();
    let mut equal_min = true;
    for a in 0..=16usize {
        for b in 0..=(16 - a) {
            for c in 0..=(16 - a - b) {
                let mut m = [a, b, c, 16 - a - b - c];
                m.sort_unstable();
                loop {
                    let mf: Vec<f64> = m.iter().map(|&v| v as f64).collect();
                    equal_min &= concentration_term(8, &mf, 2, &cp).unwrap() >= equal - 1e-12;
                    if !next_permutation(&mut m) {
                        break;
                    }
                }
            }
        }
    }
    let ok = arithmetic && monotone && equal_min;
    report(8, "bound formulas, monotonicity and equal-multiplicity minimum", ok, &format!("arithmetic {arithmetic}, monotone {monotone}, equal split minimal {equal_min}"), start);
    assert!(ok);
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else { return false };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn vertex_optimum(lp: &DenseLp) -> Option<f64> {
    let n = lp.n_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a_ub.iter().cloned().zip(lp.b_ub.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), lp.upper[j]));
        e[j] = -1.0;
        rows.push((e, -lp.lower[j]));
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| rows[idx[i]].0[j]);
        let b = DVector::from_iterator(n, idx.iter().map(|&i| rows[i].1));
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && lp.max_violation(&x) <= 1e-9 {
                let v = lp.objective_at(&x);
                best = Some(match (best, lp.sense) {
                    (None, _) => v,
                    (Some(b), Sense::Maximize) => b.max(v),
                    (Some(b), Sense::Minimize) => b.min(v),
                });
            }
        }
        // next n-combination of the rows
        let m = rows.len();
        let Some(i) = (0..n).rev().find(|&i| idx[i] < m - n + i) else { break };
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best
}

#[test]
fn criterion_09_inner_fit() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut lp_ok = 0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
        let mut lp = DenseLp::new(sense, (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect());
        for j in 0..n {
            lp.lower[j] = rng.gen_range(-3.0..0.5);
            lp.upper[j] = lp.lower[j] + rng.gen_range(0.5..4.0);
        }
        for _ in 0..rng.gen_range(1..=4) {
            let row = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            lp.add_le(row, rng.gen_range(-4.0..6.0));
        }
        let agree = match (vertex_optimum(&lp), solve_lp(&lp, 1e-9).unwrap()) {
            (Some(v), LpOutcome::Optimal { objective, x }) => (v - objective).abs() <= 1e-7 * (1.0 + v.abs()) && lp.max_violation(&x) <= 1e-7,
            (None, LpOutcome::Infeasible) => true,
            _ => false,
        };
        lp_ok += agree as usize;
    }
    // targets exactly linear in the member features
    let feats: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.1, (i * i) as f64 * 0.05]).collect();
    let w_true = [0.3, -0.2];
    let targets: Vec<f64> = feats.iter().map(|x| w_true[0] * x[0] + w_true[1] * x[1]).collect();
    let fit = inner_fit_raw(&feats, &targets, &[1.0; 6], &[0.5, 1.0], 0.0, 1.0).unwrap();
    let ok = lp_ok == 50 && fit.loss.abs() <= 1e-9;
    report(9, "simplex matches vertex enumeration; zero-loss inner fit", ok, &format!("{lp_ok}/50 LPs agree, training loss {:.1e}", fit.loss), start);
    assert!(ok);
}

#[test]
fn criterion_10_greedy_baseline() {
    let _serial = serial();
    let fx = grid6();
    let start = Instant::now();
    let imp = ImpedanceSpec::exp();
    let budget = Budget::edge_only(500.0);
    let pool: Vec<usize> = (0..fx.net.n_projects()).collect();
    let greedy = greedy_expand(&fx.net, &pool, &budget, &imp).last().unwrap().objective;
    let config = ExperimentConfig::default();
    let p = sample_size(fx.net.n_followers(), config.profile_size);
    let best: Vec<f64> = (0..10u64)
        .map(|seed| best_of_samples(&fx.net, &fx.rep, &imp, p, &budget, 7, &config, seed).unwrap())
        .collect();
    let wins = best.iter().filter(|&&b| b >= greedy).count();
    let top = best.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ok = wins >= 8;
    report(10, "best of 7 sampled solves >= greedy at budget 500", ok, &format!("greedy {greedy:.1}, best sampled {top:.1}, wins {wins}/10"), start);
    assert!(ok);
}

fn accessnet(out: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_accessnet"))
        .arg("--seed")
        .arg("7")
        .arg("--out")
        .arg(out)
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "accessnet {args:?} failed");
}

/// Runs every subcommand under `root`, one output directory each.
fn run_all(root: &Path) -> Vec<PathBuf> {
    let d = |name: &str| root.join(name);
    let s = |p: PathBuf| p.to_string_lossy().into_owned();
    let inst = s(d("gen").join("instance.json"));
    let feats = s(d("embed").join("features.csv"));
    let sample = s(d("sample").join("sample.json"));
    accessnet(&d("gen"), &["gen", "--cells", "2", "--centroids", "12"]);
    accessnet(&d("embed"), &["embed", "--instance", &inst, "--n-sim", "60", "--n-walk", "4", "--epochs", "1"]);
    accessnet(&d("sample"), &["sample", "--features", &feats, "--size", "0.1"]);
    accessnet(&d("eval"), &["eval", "--instance", &inst]);
    accessnet(&d("fit"), &["fit", "--instance", &inst, "--features", &feats, "--sample", &sample, "--model", "lasso", "--hyper", "0.01"]);
    let common = ["--instance", inst.as_str(), "--features", feats.as_str(), "--sample", sample.as_str(), "--budget", "30"];
    for v in ["reduced", "knn", "reg"] {
        let mut args = vec!["solve", "--variant", v];
        args.extend(common);
        accessnet(&d(&format!("solve_{v}")), &args);
    }
    accessnet(&d("solve_exact"), &["solve", "--instance", &inst, "--budget", "30", "--exhaustive"]);
    accessnet(&d("bound"), &["bound", "--instance", &inst, "--features", &feats, "--sample", &sample, "--n-d", "5"]);
    accessnet(&d("greedy"), &["greedy", "--instance", &inst, "--budget", "30"]);
    accessnet(&d("milp"), &["export-milp", "--instance", &inst, "--budget", "30"]);
    let sol = d("solution.txt");
    std::fs::write(&sol, "x_0 1\nx_1 0\n").unwrap();
    accessnet(&d("import"), &["import-solution", "--instance", &inst, "--solution", &s(sol)]);
    let config = root.join("exp.toml");
    std::fs::write(
        &config,
        format!(
            "instance = {inst:?}\nfeatures = {feats:?}\nbudgets = [30.0]\nmeasures = [\"exp\"]\nsizes = [0.05]\n\
             samplers = [\"uni\", \"med\"]\nmodels = [\"knn\", \"ridge\"]\nseeds = [0, 1]\nn_designs = 8\nn_d = 4\n\
             max_reg_steps = 3\nn_samples = 2\nprofile_budgets = [0.0, 30.0]\n\n[vap]\nn_iteration = 5\nn_swap = 20\n"
        ),
    )
    .unwrap();
    let cfg = s(config);
    for cmd in ["exp1", "exp2", "profile"] {
        accessnet(&d(cmd), &[cmd, "--config", &cfg]);
    }
    [
        "gen", "embed", "sample", "eval", "fit", "solve_reduced", "solve_knn", "solve_reg", "solve_exact", "bound", "greedy",
        "milp", "import", "exp1", "exp2", "profile",
    ]
    .iter()
    .map(|n| d(n))
    .collect()
}

fn primary_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            !name.ends_with(".manifest.json") && !name.contains("timings")
        })
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_11_determinism() {
    let _serial = serial();
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let a = run_all(&tmp.path().join("a"));
    let b = run_all(&tmp.path().join("b"));
    let mut diffs = Vec::new();
    let mut n_files = 0;
    let mut manifests = 0;
    for (da, db) in a.iter().zip(&b) {
        let (fa, fb) = (primary_outputs(da), primary_outputs(db));
        n_files += fa.len();
        manifests += std::fs::read_dir(da).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".manifest.json")).count();
        if fa.is_empty() || fa != fb {
            diffs.push(da.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let ok = diffs.is_empty() && manifests == a.len();
    report(11, "CLI re-runs give byte-identical primary outputs", ok, &format!("{} commands, {n_files} files, {manifests} manifests, differing: {diffs:?}", a.len()), start);
    assert!(ok);
}

fn four_node(rule: CrossingRule) -> Network {
    let node = |id, stress, c| Node { id, coords: [id as f64, 0.0], stress, is_centroid: c };
    let edge = |id, tail, head, t, stress, p| Edge { id, tail, head, travel_time: t, stress, edge_cost: t, project_id: p };
    Network::new(
        vec![node(0, Stress::Low, true), node(1, Stress::High, false), node(2, Stress::High, false), node(3, Stress::Low, true)],
        vec![
            edge(0, 0, 1, 1.0, Stress::Low, None),
            edge(1, 1, 2, 2.0, Stress::High, Some(0)),
            edge(2, 2, 3, 1.0, Stress::Low, None),
            edge(3, 2, 1, 2.0, Stress::High, Some(0)),
            edge(4, 0, 3, 70.0, Stress::Low, None),
        ],
        vec![NodeCost { node: 1, cost: 5.0 }, NodeCost { node: 2, cost: 5.0 }],
        vec![Project { id: 0, edge_ids: vec![1, 3], cost: 4.0 }],
        vec![OdPair { id: 0, origin: 0, destination: 3, weight: 2.0 }],
        rule,
    )
    .unwrap()
}

#[test]
fn criterion_12_milp_export() {
    let _serial = serial();
    let start = Instant::now();
    let b = Budget::edge_only(4.0);
    // edge 0->3 takes 70 > T2 and gets no routing variable
    let (_, convex) = build_milp(&four_node(CrossingRule::HighStressOutgoing), &ObjectiveSpec::exact(ImpedanceSpec::exp()), &b).unwrap();
    let convex_ok = convex.encoding == Encoding::Convex
        && (convex.n_routing, convex.n_flow_balance, convex.n_edge_design, convex.n_node_design, convex.n_impedance) == (4, 4, 2, 2, 4)
        && convex.n_constraints == 2 + 4 + 2 + 2 + 4
        && convex.n_variables == 12
        && convex.n_binaries == 4;
    let (_, concave) = build_milp(&four_node(CrossingRule::AllOutgoing), &ObjectiveSpec::exact(ImpedanceSpec::rec()), &b).unwrap();
    let concave_ok = concave.encoding == Encoding::Concave
        && (concave.n_node_design, concave.n_impedance) == (3, 2)
        && concave.n_constraints == 2 + 4 + 2 + 3 + 2
        && concave.n_variables == 9
        && concave.n_binaries == 3;
    let rule_ok = encoding_for(&ImpedanceSpec::exp()) == Encoding::Convex
        && encoding_for(&ImpedanceSpec::lin()) == Encoding::Convex
        && encoding_for(&ImpedanceSpec::rec()) == Encoding::Concave
        && encoding_for(&ImpedanceSpec::new(0.01, 0.02, 10.0, 60.0).unwrap()) == Encoding::Concave;
    let ok = convex_ok && concave_ok && rule_ok;
    report(12, "MILP export counts and encoding choice", ok, &format!("convex {convex_ok}, concave {concave_ok}, selection {rule_ok}"), start);
    assert!(ok);
}
