//! Experiment configuration, orchestration, run manifests and plot data.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embed::{embed_followers, EmbedConfig, FollowerFeatures};
use crate::netcore::{generate_synthetic, load_instance, GridParams, Network};
use crate::optimize::{
    algorithm1_knn, algorithm2_reg, draw_sample, exhaustive_solve, greedy_expand, import_solution,
    local_search_solve, optimality_gap, MethodConfig, ObjectiveSpec, OptimizeError,
};
use crate::predict::{experiment1, sample_size, summarize_exp1, Exp1Config, Exp1Row, Exp1Summary, FeatureSet, ModelKind, ModelSpec};
use crate::routing::{total_accessibility, Budget, ImpedanceSpec};
use crate::sampler::{Method, VapParams};
use crate::util::{mean, mix_seed, std_dev};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("missing artifact {0}")]
    Missing(PathBuf),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Instance(#[from] crate::netcore::InstanceError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Predict(#[from] crate::predict::PredictError),
    #[error(transparent)]
    Routing(#[from] crate::routing::RoutingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exp2Method {
    Reduced,
    Knn,
    Reg,
}

impl Exp2Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Exp2Method::Reduced => "Reduced",
            Exp2Method::Knn => "kNN",
            Exp2Method::Reg => "REG",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// instance file; a synthetic grid is generated when absent
    pub instance: Option<PathBuf>,
    pub grid_seed: u64,
    pub grid: GridParams,
    /// feature CSV; `{measure}` in the path is replaced by the preset name.
    /// Features are learned when absent.
    pub features: Option<String>,
    pub embed: EmbedConfig,
    pub embed_seed: u64,
    pub budgets: Vec<f64>,
    pub measures: Vec<String>,
    pub sizes: Vec<f64>,
    pub samplers: Vec<Method>,
    pub models: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    pub n_designs: usize,
    pub vap: VapParams,
    pub n_repeat: usize,
    pub restarts: usize,
    pub omega: usize,
    pub n_d: usize,
    pub l_step: f64,
    pub lambda_reg: f64,
    pub max_reg_steps: usize,
    pub methods: Vec<Exp2Method>,
    /// externally solved optima keyed `"<budget>:<measure>"`
    pub optima: BTreeMap<String, PathBuf>,
    pub n_samples: usize,
    pub profile_budgets: Vec<f64>,
    pub profile_size: f64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            instance: None,
            grid_seed: 0,
            grid: GridParams::default(),
            features: None,
            embed: EmbedConfig::default(),
            embed_seed: 0,
            budgets: vec![100.0, 300.0, 500.0],
            measures: vec!["exp".into(), "lin".into(), "rec".into()],
            sizes: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            samplers: vec![Method::Uni, Method::Med, Method::Cen],
            models: vec![ModelKind::Knn, ModelKind::Linear, ModelKind::Lasso, ModelKind::Ridge],
            seeds: (0..10).collect(),
            n_designs: 100,
            vap: VapParams::default(),
            n_repeat: 200,
            restarts: 1,
            omega: 2,
            n_d: 20,
            l_step: 1.0,
            lambda_reg: 1.0,
            max_reg_steps: 20,
            methods: vec![Exp2Method::Reduced, Exp2Method::Knn, Exp2Method::Reg],
            optima: BTreeMap::new(),
            n_samples: 21,
            profile_budgets: vec![0.0, 100.0, 200.0, 300.0, 400.0, 500.0],
            profile_size: 0.01,
            out: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::Config {
            path: String::new(),
            message: e.to_string(),
        })?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Invalid("seeds must be nonempty".into()));
        }
        if let Some(p) = &self.instance {
            if !p.exists() {
                return Err(HarnessError::Missing(p.clone()));
            }
        }
        for m in &self.measures {
            ImpedanceSpec::preset(m)?;
            if let Some(p) = self.features_path(m) {
                if !p.exists() {
                    return Err(HarnessError::Missing(p));
                }
            }
        }
        for p in self.optima.values() {
            if !p.exists() {
                return Err(HarnessError::Missing(p.clone()));
            }
        }
        if self.sizes.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return Err(HarnessError::Invalid("sample sizes must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn features_path(&self, measure: &str) -> Option<PathBuf> {
        self.features.as_ref().map(|f| PathBuf::from(f.replace("{measure}", measure)))
    }

    pub fn network(&self) -> Result<Network, HarnessError> {
        Ok(match &self.instance {
            Some(p) => load_instance(p)?,
            None => generate_synthetic(self.grid_seed, &self.grid)?,
        })
    }

    /// Learned features for one impedance preset, read from disk when
    /// configured.
    pub fn learned_features(&self, network: &Network, measure: &str) -> Result<FollowerFeatures, HarnessError> {
        if let Some(p) = self.features_path(measure) {
            return Ok(FollowerFeatures::load(&p)?);
        }
        let imp = ImpedanceSpec::preset(measure)?;
        let mut embed = self.embed.clone();
        embed.p_max = embed.p_max.min(network.n_projects());
        embed.q_max = embed.q_max.min(network.high_stress_nodes().len());
        Ok(embed_followers(network, &imp, &embed, self.embed_seed)?.features)
    }

    fn method_config(&self, sampler: Method, seed: u64) -> MethodConfig {
        MethodConfig {
            n_d: self.n_d,
            restarts: self.restarts,
            vap: self.vap.clone(),
            n_repeat: self.n_repeat,
            p_max: 25,
            sampler,
            seed,
        }
    }
}

/// SHA-256 over the canonical (key-sorted) JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String, HarnessError> {
    let value = serde_json::to_value(config)?;
    let digest = Sha256::digest(serde_json::to_string(&value)?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn version_string() -> String {
    match option_env!("ACCESSNET_GIT_DESCRIBE") {
        Some(d) => d.to_string(),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

/// Everything needed to re-execute a run. Timings live here and never in
/// primary outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub wall_times: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn new(command: &str, args: Vec<String>, seed: u64, config_hash: String) -> Self {
        RunRecord {
            command: command.to_string(),
            args,
            seed,
            config_hash,
            version: version_string(),
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
            wall_times: BTreeMap::new(),
        }
    }

    /// Writes `<command>.manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.manifest.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Exp1Report {
    pub rows: Vec<Exp1Row>,
    pub summary: Vec<Exp1Summary>,
}

/// Prediction experiment over learned (REP) and geometric (TSP) features.
pub fn run_experiment1(config: &ExperimentConfig, network: &Network) -> Result<Exp1Report, HarnessError> {
    let tsp = crate::predict::tsp_features(network);
    let mut rows = Vec::new();
    for measure in &config.measures {
        let rep = config.learned_features(network, measure)?;
        let sets = [
            FeatureSet {
                name: "REP".into(),
                features: &rep,
                learned: true,
            },
            FeatureSet {
                name: "TSP".into(),
                features: &tsp,
                learned: false,
            },
        ];
        let cfg = Exp1Config {
            budgets: config.budgets.clone(),
            measures: vec![measure.clone()],
            n_designs: config.n_designs,
            sizes: config.sizes.clone(),
            samplers: config.samplers.clone(),
            models: config.models.iter().map(|&kind| ModelSpec { kind, hyper: None }).collect(),
            seeds: config.seeds.clone(),
            p_max: 25,
            vap: config.vap.clone(),
            n_repeat: config.n_repeat,
        };
        rows.extend(experiment1(network, &sets, &cfg)?);
    }
    let summary = summarize_exp1(&rows);
    Ok(Exp1Report { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Row {
    pub budget: f64,
    pub measure: String,
    pub size: f64,
    pub method: String,
    pub sampler: String,
    pub seed: u64,
    pub objective: f64,
    pub optimum: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Stability {
    pub budget: f64,
    pub measure: String,
    pub size: f64,
    pub method: String,
    pub sampler: String,
    pub n: usize,
    pub mean_gap: f64,
    pub std_gap: f64,
}

#[derive(Debug, Clone)]
pub struct Exp2Report {
    pub rows: Vec<Exp2Row>,
    pub stability: Vec<Exp2Stability>,
    pub skipped: Vec<(f64, String)>,
}

fn cell_optimum(config: &ExperimentConfig, network: &Network, budget: f64, measure: &str, imp: &ImpedanceSpec) -> Result<Option<f64>, HarnessError> {
    let b = Budget::edge_only(budget);
    match exhaustive_solve(&ObjectiveSpec::exact(*imp), network, &b) {
        Ok(r) => Ok(Some(r.objective)),
        Err(OptimizeError::TooManySubsets { .. }) => match config.optima.get(&format!("{budget}:{measure}")) {
            Some(path) => {
                let d = import_solution(network, path)?;
                Ok(Some(total_accessibility(network, &d, imp)))
            }
            None => Ok(None),
        },
        Err(e) => Err(e.into()),
    }
}

/// Optimality gaps of the sampling-based methods against the per-cell
/// optimum. Seeds are paired across methods.
pub fn run_experiment2(config: &ExperimentConfig, network: &Network) -> Result<Exp2Report, HarnessError> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let n = network.n_followers();
    for measure in &config.measures {
        let imp = ImpedanceSpec::preset(measure)?;
        let features = config.learned_features(network, measure)?;
        for &budget in &config.budgets {
            let Some(optimum) = cell_optimum(config, network, budget, measure, &imp)? else {
                log::warn!("no optimum for budget {budget}, measure {measure}; cell skipped");
                skipped.push((budget, measure.clone()));
                continue;
            };
            let b = Budget::edge_only(budget);
            for &size in &config.sizes {
                let p = sample_size(n, size);
                for &method in &config.methods {
                    for &sampler in &config.samplers {
                        for &seed in &config.seeds {
                            let mc = config.method_config(sampler, seed);
                            let objective = match method {
                                Exp2Method::Reduced => {
                                    let s = draw_sample(&features, p, 1, &mc, 0xA2)?;
                                    local_search_solve(&ObjectiveSpec::reduced(imp, s), network, &b, seed, config.restarts)?.exact_objective
                                }
                                Exp2Method::Knn => algorithm1_knn(network, &features, &imp, p, config.omega, &b, &mc)?.result.exact_objective,
                                Exp2Method::Reg => {
                                    algorithm2_reg(network, &features, &imp, p, config.l_step, config.lambda_reg, &b, &mc, config.max_reg_steps)?
                                        .result
                                        .exact_objective
                                }
                            };
                            rows.push(Exp2Row {
                                budget,
                                measure: measure.clone(),
                                size,
                                method: method.tag().into(),
                                sampler: sampler.tag().into(),
                                seed,
                                objective,
                                optimum,
                                gap: optimality_gap(optimum, objective),
                            });
                        }
                    }
                }
            }
        }
    }
    let stability = exp2_stability(&rows);
    Ok(Exp2Report { rows, stability, skipped })
}

pub fn exp2_stability(rows: &[Exp2Row]) -> Vec<Exp2Stability> {
    let mut groups: BTreeMap<(String, u64, u64, String, String), (f64, f64, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        groups
            .entry((
                r.measure.clone(),
                r.budget.to_bits(),
                r.size.to_bits(),
                r.method.clone(),
                r.sampler.clone(),
            ))
            .or_insert_with(|| (r.budget, r.size, Vec::new()))
            .2
            .push(r.gap);
    }
    let mut out: Vec<Exp2Stability> = groups
        .into_iter()
        .map(|((measure, _, _, method, sampler), (budget, size, gaps))| Exp2Stability {
            budget,
            measure,
            size,
            method,
            sampler,
            n: gaps.len(),
            mean_gap: mean(&gaps),
            std_gap: if gaps.len() > 1 { std_dev(&gaps) } else { 0.0 },
        })
        .collect();
    out.sort_by(|a, b| {
        a.measure
            .cmp(&b.measure)
            .then(a.budget.total_cmp(&b.budget))
            .then(a.size.total_cmp(&b.size))
            .then(a.method.cmp(&b.method))
            .then(a.sampler.cmp(&b.sampler))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub measure: String,
    pub seed: u64,
    pub budget: f64,
    pub greedy: f64,
    pub optimized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTiming {
    pub measure: String,
    pub seed: u64,
    pub budget: f64,
    pub greedy_seconds: f64,
    pub optimized_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ProfileReport {
    pub rows: Vec<ProfileRow>,
    pub timings: Vec<ProfileTiming>,
}

/// Best full-follower objective over `n_samples` kNN-augmented solves, each
/// on its own p-median sample.
pub fn best_of_samples(
    network: &Network,
    features: &FollowerFeatures,
    imp: &ImpedanceSpec,
    p: usize,
    budget: &Budget,
    n_samples: usize,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<f64, HarnessError> {
    let mut best = f64::NEG_INFINITY;
    for i in 0..n_samples.max(1) {
        let mc = config.method_config(Method::Med, mix_seed(seed, i as u64, 0x9F));
        let s = draw_sample(features, p, 1, &mc, 0xA2)?;
        let spec = ObjectiveSpec::knn_aug(*imp, s, features.clone(), 1);
        let r = local_search_solve(&spec, network, budget, mc.seed, config.restarts)?;
        best = best.max(r.exact_objective);
    }
    Ok(best)
}

/// Greedy expansion against the best sampled augmented-model solution over
/// a budget sweep.
pub fn run_profile(config: &ExperimentConfig, network: &Network) -> Result<ProfileReport, HarnessError> {
    let pool: Vec<usize> = (0..network.n_projects()).collect();
    let p = sample_size(network.n_followers(), config.profile_size);
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for measure in &config.measures {
        let imp = ImpedanceSpec::preset(measure)?;
        let features = config.learned_features(network, measure)?;
        for &seed in &config.seeds {
            for &budget in &config.profile_budgets {
                let b = Budget::edge_only(budget);
                let t0 = std::time::Instant::now();
                let greedy = greedy_expand(network, &pool, &b, &imp).last().map_or(0.0, |s| s.objective);
                let t1 = std::time::Instant::now();
                let optimized = best_of_samples(network, &features, &imp, p, &b, config.n_samples, config, seed)?;
                rows.push(ProfileRow {
                    measure: measure.clone(),
                    seed,
                    budget,
                    greedy,
                    optimized,
                });
                timings.push(ProfileTiming {
                    measure: measure.clone(),
                    seed,
                    budget,
                    greedy_seconds: (t1 - t0).as_secs_f64(),
                    optimized_seconds: t1.elapsed().as_secs_f64(),
                });
            }
        }
    }
    Ok(ProfileReport { rows, timings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub measure: String,
    pub budget: f64,
    pub size: f64,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

/// Long-format plot data sorted by (measure, budget, size, method).
pub fn emit_plotdata(rows: &[PlotRow]) -> Result<String, HarnessError> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| {
        a.measure
            .cmp(&b.measure)
            .then(a.budget.total_cmp(&b.budget))
            .then(a.size.total_cmp(&b.size))
            .then(a.method.cmp(&b.method))
            .then(a.metric.cmp(&b.metric))
    });
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["measure", "budget", "size", "method", "metric", "value"])?;
    for r in &sorted {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn exp1_plot_rows(summary: &[Exp1Summary]) -> Vec<PlotRow> {
    summary
        .iter()
        .map(|s| PlotRow {
            measure: s.measure.clone(),
            budget: s.budget,
            size: s.size,
            method: format!("{}-{}-{}", s.features, s.sampler, s.model),
            metric: "mae_mean".into(),
            value: s.mae_mean,
        })
        .collect()
}

pub fn exp2_plot_rows(stability: &[Exp2Stability]) -> Vec<PlotRow> {
    stability
        .iter()
        .flat_map(|s| {
            let method = format!("{}-{}", s.method, s.sampler);
            [("mean_gap", s.mean_gap), ("std_gap", s.std_gap)].map(|(metric, value)| PlotRow {
                measure: s.measure.clone(),
                budget: s.budget,
                size: s.size,
                method: method.clone(),
                metric: metric.into(),
                value,
            })
        })
        .collect()
}
