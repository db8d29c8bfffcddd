use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use accessnet::embed::{embed_followers, sample_feasible_designs, EmbedConfig, FollowerFeatures, WalkConfig};
use accessnet::harness::{
    config_hash, emit_plotdata, exp1_plot_rows, exp2_plot_rows, run_experiment1, run_experiment2, run_profile, write_csv,
    ExperimentConfig, RunRecord,
};
use accessnet::netcore::CrossingRule;
use accessnet::optimize::{
    build_milp, estimate_mu, exhaustive_solve, greedy_expand, import_solution, knn_bound, local_search_solve, q_bar,
    reg_bound, BoundParams, ObjectiveSpec,
};
use accessnet::predict::{fit_linear, predict_all, sample_size, test_mae, Dataset, Family, ModelKind};
use accessnet::routing::{Budget, Design, FollowerOracle, ImpedanceSpec};
use accessnet::sampler::{p_center_sample, uniform_sample, vap_median_sample, Method, Sample, VapParams};
use accessnet::{generate_synthetic, load_instance, save_instance, GridParams, Network};

#[derive(Parser, Serialize)]
#[command(name = "accessnet", version, about = "Sampling and learning toolkit for accessibility network design")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate a synthetic grid instance
    Gen(GenArgs),
    /// Evaluate a design on the full follower set
    Eval(EvalArgs),
    /// Learn follower features
    Embed(EmbedArgs),
    /// Draw a follower sample
    Sample(SampleArgs),
    /// Fit a prediction model on a sample and report its test error
    Fit(FitArgs),
    /// Solve a master-problem variant
    Solve(SolveArgs),
    /// Evaluate an optimality-gap bound
    Bound(BoundArgs),
    /// Greedy expansion baseline
    Greedy(GreedyArgs),
    /// Prediction experiment
    Exp1(ConfigArgs),
    /// Optimality-gap experiment
    Exp2(ConfigArgs),
    /// Greedy vs sampled-model budget sweep
    Profile(ConfigArgs),
    /// Write the single-level MILP in LP format
    ExportMilp(ExportArgs),
    /// Read an external solver's solution file
    ImportSolution(ImportArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = 6)]
    cells: usize,
    #[arg(long, default_value_t = 72)]
    centroids: usize,
    #[arg(long, default_value_t = 3)]
    minor: usize,
    /// high_stress_outgoing or all_outgoing
    #[arg(long, default_value = "all_outgoing")]
    crossing_rule: String,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    instance: PathBuf,
    /// design JSON; the empty design when absent
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, default_value = "exp")]
    impedance: String,
}

#[derive(Args, Serialize)]
struct EmbedArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "exp")]
    impedance: String,
    #[arg(long, default_value_t = 5000)]
    n_sim: usize,
    #[arg(long, default_value_t = 50)]
    n_walk: usize,
    #[arg(long, default_value_t = 20)]
    l_walk: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// most projects per sampled design, capped at the project count
    #[arg(long, default_value_t = 25)]
    p_max: usize,
    /// most signalized nodes per sampled design, capped at the high-stress node count
    #[arg(long, default_value_t = 10)]
    q_max: usize,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    features: PathBuf,
    /// uni, med or cen
    #[arg(long, default_value = "med")]
    method: String,
    /// sample size as a fraction of the followers
    #[arg(long, default_value_t = 0.01)]
    size: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    n_repeat: usize,
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    sample: PathBuf,
    /// design whose accessibilities are the targets; empty when absent
    #[arg(long)]
    design: Option<PathBuf>,
    /// knn, linear, lasso or ridge
    #[arg(long, default_value = "knn")]
    model: String,
    /// k for kNN, α for lasso and ridge
    #[arg(long, default_value_t = 1.0)]
    hyper: f64,
    #[arg(long, default_value = "exp")]
    impedance: String,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// exact, reduced, knn or reg
    #[arg(long, default_value = "exact")]
    variant: String,
    #[arg(long)]
    sample: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = 0.0)]
    node_budget: f64,
    #[arg(long, default_value = "exp")]
    impedance: String,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = f64::INFINITY)]
    l_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_reg: f64,
    /// enumerate every feasible project subset instead of local search
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Args, Serialize)]
struct BoundArgs {
    #[arg(long)]
    instance: PathBuf,
    /// knn or reg
    #[arg(long, default_value = "knn")]
    variant: String,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    sample: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    l_bar: f64,
    /// estimated from random designs when absent
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    g_bar: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value = "exp")]
    impedance: String,
    #[arg(long, default_value_t = 300.0)]
    budget: f64,
    #[arg(long, default_value_t = 20)]
    n_d: usize,
}

#[derive(Args, Serialize)]
struct GreedyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value = "exp")]
    impedance: String,
}

#[derive(Args, Serialize)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Serialize)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    /// exact or reduced
    #[arg(long, default_value = "exact")]
    variant: String,
    #[arg(long)]
    sample: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = 0.0)]
    node_budget: f64,
    #[arg(long, default_value = "exp")]
    impedance: String,
    #[arg(long, default_value = "model.lp")]
    file: String,
}

#[derive(Args, Serialize)]
struct ImportArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value = "exp")]
    impedance: String,
}

struct Ctx {
    out: PathBuf,
    seed: u64,
    record: RunRecord,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        self.record.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, &text)
    }

    fn write_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        write_csv(&self.path(name), rows)?;
        self.record.outputs.push(name.to_string());
        Ok(())
    }
}

fn impedance(name: &str) -> Result<ImpedanceSpec> {
    Ok(ImpedanceSpec::preset(name)?)
}

fn load_design(net: &Network, path: Option<&Path>) -> Result<Design> {
    match path {
        Some(p) => Ok(Design::from_json(net, &std::fs::read_to_string(p)?)?),
        None => Ok(Design::empty(net)),
    }
}

fn load_sample(features: &FollowerFeatures, path: &Path) -> Result<Sample> {
    Ok(Sample::from_json(features, &std::fs::read_to_string(path)?)?)
}

#[derive(Serialize)]
struct SolutionOut {
    variant: String,
    objective: f64,
    exact_objective: f64,
    projects: Vec<usize>,
    nodes: Vec<usize>,
}

fn cmd_gen(ctx: &mut Ctx, a: &GenArgs) -> Result<()> {
    let rule = match a.crossing_rule.as_str() {
        "high_stress_outgoing" => CrossingRule::HighStressOutgoing,
        "all_outgoing" => CrossingRule::AllOutgoing,
        other => bail!("unknown crossing rule {other}"),
    };
    let params = GridParams {
        cells: a.cells,
        centroids: a.centroids,
        minor_per_segment: a.minor,
        crossing_rule: rule,
        ..Default::default()
    };
    let net = generate_synthetic(ctx.seed, &params)?;
    save_instance(&net, &ctx.path("instance.json"))?;
    ctx.record.outputs.push("instance.json".into());
    ctx.record.metrics.insert("nodes".into(), net.n_nodes() as f64);
    ctx.record.metrics.insert("edges".into(), net.edges.len() as f64);
    ctx.record.metrics.insert("followers".into(), net.n_followers() as f64);
    Ok(())
}

#[derive(Serialize)]
struct FollowerRow {
    od_id: usize,
    travel_time: f64,
    accessibility: f64,
}

fn cmd_eval(ctx: &mut Ctx, a: &EvalArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let d = load_design(&net, a.design.as_deref())?;
    let times = FollowerOracle::all(&net, imp.t2).times(&net, &d);
    let q = net.weights();
    let rows: Vec<FollowerRow> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| FollowerRow {
            od_id: i,
            travel_time: t,
            accessibility: imp.g(t),
        })
        .collect();
    let total: f64 = rows.iter().zip(&q).map(|(r, w)| r.accessibility * w).sum();
    ctx.write_rows("followers.csv", &rows)?;
    ctx.write_json("eval.json", &BTreeMap::from([("objective", total), ("cost", d.edge_cost(&net))]))?;
    Ok(())
}

#[derive(Serialize)]
struct LossRow {
    block: usize,
    loss: f64,
}

fn cmd_embed(ctx: &mut Ctx, a: &EmbedArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let p_max = a.p_max.min(net.n_projects());
    let q_max = a.q_max.min(net.high_stress_nodes().len());
    if (p_max, q_max) != (a.p_max, a.q_max) {
        log::info!("design sampler bounds capped to P = {p_max}, Q = {q_max}");
    }
    let cfg = EmbedConfig {
        n_sim: a.n_sim,
        p_max,
        q_max,
        dim: a.dim,
        walk: WalkConfig {
            n_walk: a.n_walk,
            l_walk: a.l_walk,
            window: a.window,
            epochs: a.epochs,
            ..Default::default()
        },
        ..Default::default()
    };
    let t = Instant::now();
    let rep = embed_followers(&net, &imp, &cfg, ctx.seed)?;
    ctx.record.wall_times.insert("embed".into(), t.elapsed().as_secs_f64());
    ctx.write("features.csv", &rep.features.to_csv())?;
    let loss: Vec<LossRow> = rep
        .loss_trace
        .iter()
        .enumerate()
        .map(|(block, &loss)| LossRow { block, loss })
        .collect();
    ctx.write_rows("loss.csv", &loss)?;
    ctx.record.metrics.insert("active_followers".into(), rep.n_active as f64);
    Ok(())
}

fn cmd_sample(ctx: &mut Ctx, a: &SampleArgs) -> Result<()> {
    let f = FollowerFeatures::load(&a.features)?;
    let p = sample_size(f.len(), a.size);
    let s = match Method::parse(&a.method) {
        Some(Method::Uni) => uniform_sample(&f, p, a.k, ctx.seed)?,
        Some(Method::Med) => vap_median_sample(&f, p, a.k, &VapParams::default(), ctx.seed)?.sample,
        Some(Method::Cen) => p_center_sample(&f, p, a.k, a.n_repeat, ctx.seed)?.sample,
        _ => bail!("unknown sampler {}", a.method),
    };
    ctx.write("sample.json", &(s.to_json() + "\n"))?;
    ctx.record.metrics.insert("p".into(), p as f64);
    Ok(())
}

fn cmd_fit(ctx: &mut Ctx, a: &FitArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let f = FollowerFeatures::load(&a.features)?;
    let s = load_sample(&f, &a.sample)?;
    let d = load_design(&net, a.design.as_deref())?;
    let targets = FollowerOracle::all(&net, imp.t2).accessibilities(&net, &d, &imp);
    let kind = ModelKind::parse(&a.model).with_context(|| format!("unknown model {}", a.model))?;
    let knn = if kind == ModelKind::Knn {
        Some(s.with_k(&f, a.hyper.round().max(1.0) as usize)?)
    } else {
        None
    };
    let pred = predict_all(kind, a.hyper, &s, knn.as_ref(), &f, &targets)?;
    let mae = test_mae(&pred, &targets, &s);
    let mut out = BTreeMap::from([("test_mae".to_string(), serde_json::json!(mae))]);
    if kind != ModelKind::Knn {
        let family = match kind {
            ModelKind::Lasso => Family::Lasso { alpha: a.hyper },
            ModelKind::Ridge => Family::Ridge { alpha: a.hyper },
            _ => Family::Ols,
        };
        let model = fit_linear(&Dataset::from_subset(&f, &targets, &s.members), family, true)?;
        out.insert("weights".into(), serde_json::json!(model.w));
        out.insert("intercept".into(), serde_json::json!(model.intercept));
    }
    ctx.write_json("fit.json", &out)?;
    Ok(())
}

fn objective_spec(
    variant: &str,
    imp: ImpedanceSpec,
    sample: Option<&Path>,
    features: Option<&Path>,
    k: usize,
    l_bar: f64,
    lambda_reg: f64,
) -> Result<ObjectiveSpec> {
    if variant == "exact" {
        return Ok(ObjectiveSpec::exact(imp));
    }
    let fpath = features.context("--features is required for sampled variants")?;
    let f = FollowerFeatures::load(fpath)?;
    let s = load_sample(&f, sample.context("--sample is required for sampled variants")?)?;
    Ok(match variant {
        "reduced" => ObjectiveSpec::reduced(imp, s),
        "knn" => ObjectiveSpec::knn_aug(imp, s, f, k),
        "reg" => ObjectiveSpec::reg_aug(imp, s.with_k(&f, 1)?, f, l_bar, lambda_reg),
        other => bail!("unknown variant {other}"),
    })
}

fn cmd_solve(ctx: &mut Ctx, a: &SolveArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let spec = objective_spec(&a.variant, imp, a.sample.as_deref(), a.features.as_deref(), a.k, a.l_bar, a.lambda_reg)?;
    let budget = Budget {
        edge: a.budget,
        node: a.node_budget,
    };
    let r = if a.exhaustive {
        exhaustive_solve(&spec, &net, &budget)?
    } else {
        local_search_solve(&spec, &net, &budget, ctx.seed, a.restarts)?
    };
    ctx.record.wall_times.insert("solve".into(), r.wall_time);
    ctx.write("design.json", &(r.design.to_json() + "\n"))?;
    ctx.write_json(
        "solution.json",
        &SolutionOut {
            variant: a.variant.clone(),
            objective: r.objective,
            exact_objective: r.exact_objective,
            projects: r.design.selected_projects(),
            nodes: r.design.selected_nodes(),
        },
    )?;
    Ok(())
}

fn cmd_bound(ctx: &mut Ctx, a: &BoundArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let f = FollowerFeatures::load(&a.features)?;
    let s = load_sample(&f, &a.sample)?;
    let mu = match a.mu {
        Some(m) => m,
        None => {
            let designs = sample_feasible_designs(&net, a.n_d, &Budget::edge_only(a.budget), 25.min(net.n_projects()), 0, ctx.seed)?;
            let oracle = FollowerOracle::all(&net, imp.t2);
            let mut mean = vec![0.0; net.n_followers()];
            for d in &designs {
                for (m, g) in mean.iter_mut().zip(oracle.accessibilities(&net, d, &imp)) {
                    *m += g / designs.len() as f64;
                }
            }
            estimate_mu(&f, &mean, 10_000, ctx.seed)
        }
    };
    let params = BoundParams {
        mu,
        lambda: a.lambda,
        g_bar: a.g_bar,
        q_bar: q_bar(&s, &net.weights()),
        gamma: a.gamma,
    };
    let value = match a.variant.as_str() {
        "knn" => serde_json::to_value(knn_bound(&s, &f, a.k, &params)?)?,
        "reg" => serde_json::to_value(reg_bound(&s, &f, a.l_bar, &params)?)?,
        other => bail!("unknown bound variant {other}"),
    };
    ctx.write_json(
        "bound.json",
        &serde_json::json!({ "params": params, "bound": value, "note": "minimization-form gap magnitude" }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct GreedyRow {
    step: usize,
    added: Option<usize>,
    cost: f64,
    objective: f64,
}

fn cmd_greedy(ctx: &mut Ctx, a: &GreedyArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let pool: Vec<usize> = (0..net.n_projects()).collect();
    let steps = greedy_expand(&net, &pool, &Budget::edge_only(a.budget), &imp);
    let rows: Vec<GreedyRow> = steps
        .iter()
        .enumerate()
        .map(|(i, s)| GreedyRow {
            step: i,
            added: s.added,
            cost: s.cost,
            objective: s.objective,
        })
        .collect();
    ctx.write_rows("greedy.csv", &rows)?;
    Ok(())
}

fn load_config(ctx: &mut Ctx, a: &ConfigArgs) -> Result<(ExperimentConfig, Network)> {
    let cfg = ExperimentConfig::load(&a.config)?;
    ctx.record.config_hash = config_hash(&cfg)?;
    let net = cfg.network()?;
    Ok((cfg, net))
}

fn cmd_exp1(ctx: &mut Ctx, a: &ConfigArgs) -> Result<()> {
    let (cfg, net) = load_config(ctx, a)?;
    let rep = run_experiment1(&cfg, &net)?;
    ctx.write_rows("exp1_seeds.csv", &rep.rows)?;
    ctx.write_rows("exp1_summary.csv", &rep.summary)?;
    ctx.write("exp1_plot.csv", &emit_plotdata(&exp1_plot_rows(&rep.summary))?)?;
    Ok(())
}

fn cmd_exp2(ctx: &mut Ctx, a: &ConfigArgs) -> Result<()> {
    let (cfg, net) = load_config(ctx, a)?;
    let rep = run_experiment2(&cfg, &net)?;
    ctx.write_rows("exp2_gaps.csv", &rep.rows)?;
    ctx.write_rows("exp2_stability.csv", &rep.stability)?;
    ctx.write("exp2_plot.csv", &emit_plotdata(&exp2_plot_rows(&rep.stability))?)?;
    ctx.record.metrics.insert("skipped_cells".into(), rep.skipped.len() as f64);
    Ok(())
}

fn cmd_profile(ctx: &mut Ctx, a: &ConfigArgs) -> Result<()> {
    let (cfg, net) = load_config(ctx, a)?;
    let rep = run_profile(&cfg, &net)?;
    ctx.write_rows("profile.csv", &rep.rows)?;
    write_csv(&ctx.path("profile_timings.csv"), &rep.timings)?;
    for t in &rep.timings {
        ctx.record.wall_times.insert(format!("{}:{}:{}", t.measure, t.seed, t.budget), t.greedy_seconds + t.optimized_seconds);
    }
    Ok(())
}

fn cmd_export(ctx: &mut Ctx, a: &ExportArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let spec = objective_spec(&a.variant, imp, a.sample.as_deref(), a.features.as_deref(), 1, f64::INFINITY, f64::INFINITY)?;
    let budget = Budget {
        edge: a.budget,
        node: a.node_budget,
    };
    let (text, stats) = build_milp(&net, &spec, &budget)?;
    ctx.write(&a.file, &text)?;
    ctx.write_json("milp_stats.json", &stats)?;
    Ok(())
}

fn cmd_import(ctx: &mut Ctx, a: &ImportArgs) -> Result<()> {
    let net = load_instance(&a.instance)?;
    let imp = impedance(&a.impedance)?;
    let d = import_solution(&net, &a.solution)?;
    let total = accessnet::routing::total_accessibility(&net, &d, &imp);
    ctx.write("design.json", &(d.to_json() + "\n"))?;
    ctx.write_json(
        "imported.json",
        &serde_json::json!({ "objective": total, "edge_cost": d.edge_cost(&net), "projects": d.selected_projects() }),
    )?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let name = serde_json::to_value(&cli.command)?
        .as_object()
        .and_then(|o| o.keys().next().cloned())
        .unwrap_or_default();
    let hash = config_hash(&cli)?;
    let mut ctx = Ctx {
        out: cli.out.clone(),
        seed: cli.seed,
        record: RunRecord::new(&name, std::env::args().skip(1).collect(), cli.seed, hash),
    };
    let start = Instant::now();
    match &cli.command {
        Command::Gen(a) => cmd_gen(&mut ctx, a),
        Command::Eval(a) => cmd_eval(&mut ctx, a),
        Command::Embed(a) => cmd_embed(&mut ctx, a),
        Command::Sample(a) => cmd_sample(&mut ctx, a),
        Command::Fit(a) => cmd_fit(&mut ctx, a),
        Command::Solve(a) => cmd_solve(&mut ctx, a),
        Command::Bound(a) => cmd_bound(&mut ctx, a),
        Command::Greedy(a) => cmd_greedy(&mut ctx, a),
        Command::Exp1(a) => cmd_exp1(&mut ctx, a),
        Command::Exp2(a) => cmd_exp2(&mut ctx, a),
        Command::Profile(a) => cmd_profile(&mut ctx, a),
        Command::ExportMilp(a) => cmd_export(&mut ctx, a),
        Command::ImportSolution(a) => cmd_import(&mut ctx, a),
    }?;
    ctx.record.wall_times.insert("total".into(), start.elapsed().as_secs_f64());
    ctx.record.write(&ctx.out)?;
    Ok(())
}
