//! Batch experiment runner behind the `rpb` binary.
//!
//! Every run is described by one flat JSON document; unknown keys are
//! rejected. Exit codes: 0 success, 1 configuration error, 2 runtime or data
//! error, 3 coverage below target.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{recompute_bound, run_baseline, BaselineConfig, BaselineMethod, BaselineReport};
use crate::concentration::DiscreteSupport;
use crate::data::{load_idx, Dataset};
use crate::error::Error;
use crate::hypotheses::train::TrainConfig;
use crate::hypotheses::{
    empirical_gibbs_loss, Architecture, EvalMode, GaussianNetworkDistribution, HypothesisDistribution,
    SurrogateConfig,
};
use crate::recursion::{
    evaluate_recursive, geometric_split, run_recursive, split_order, BoundTrace, GammaPolicy, RecursionConfig,
    StepSeeds,
};
use crate::rng::derive_seed;
use crate::validate::{
    coverage_baseline, coverage_kl, coverage_pb_kl, coverage_pb_split_kl, coverage_recursive, coverage_sampling,
    coverage_split_kl, BoundVariant, CoverageReport, ThresholdSetup,
};

#[derive(Debug, Parser)]
#[command(name = "rpb", version, about = "Recursive PAC-Bayes bounds: experiments and coverage checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the geometric chunk sizes for N points and T steps.
    Split { n: usize, steps: usize },
    /// Train and evaluate one method; write CSV, JSON and checkpoints.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a coverage harness; exits with 3 when coverage falls short.
    Validate {
        config: PathBuf,
        /// Number of trials (overrides `trials`).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several configurations and merge the results into one table.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(Error),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rpb,
    Uninformed,
    Informed,
    InformedExcess,
}

impl Method {
    fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Method::Rpb => None,
            Method::Uninformed => Some(BaselineMethod::Uninformed),
            Method::Informed => Some(BaselineMethod::Informed),
            Method::InformedExcess => Some(BaselineMethod::InformedExcess),
        }
    }

    fn tag(self) -> &'static str {
        match self.baseline() {
            None => "rpb",
            Some(b) => b.tag(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Finite,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Harness {
    Kl,
    SplitKl,
    PacBayesKl,
    PacBayesSplitKl,
    Sampling,
    Recursive,
    Uninformed,
    Informed,
    InformedExcess,
}

/// One experiment. See the README for the meaning of every key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub method: Method,
    pub data: DataSource,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub subsample: Option<usize>,
    pub test_subsample: Option<usize>,
    pub n: usize,
    pub n_test: usize,
    pub theta_star: f64,
    pub eta: f64,
    pub steps: usize,
    pub gamma: f64,
    pub gamma_grid: Option<Vec<f64>>,
    pub delta: f64,
    pub delta_prime: f64,
    pub model: Model,
    pub class_size: usize,
    pub hidden: Vec<usize>,
    pub sigma0: f64,
    pub mode: Option<EvalMode>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub first_epochs: Option<usize>,
    pub c1: f64,
    pub c2: f64,
    pub p_min: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub out_dir: PathBuf,
    pub harness: Harness,
    pub trials: usize,
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
    pub p: f64,
    pub draws: usize,
    pub negative_control: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = SurrogateConfig::default();
        Self {
            method: Method::Rpb,
            data: DataSource::Synthetic,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            subsample: None,
            test_subsample: None,
            n: 2000,
            n_test: 10_000,
            theta_star: 0.5,
            eta: 0.1,
            steps: 4,
            gamma: 0.5,
            gamma_grid: None,
            delta: 0.025,
            delta_prime: 0.01,
            model: Model::Finite,
            class_size: 101,
            hidden: vec![100],
            sigma0: 0.03,
            mode: None,
            learning_rate: None,
            momentum: None,
            batch_size: None,
            epochs: None,
            first_epochs: None,
            c1: s.c1,
            c2: s.c2,
            p_min: s.p_min,
            seed: 0,
            repetitions: 1,
            out_dir: PathBuf::from("out"),
            harness: Harness::SplitKl,
            trials: 1000,
            support: vec![-0.5, 0.0, 0.5, 1.0],
            weights: vec![0.1, 0.4, 0.4, 0.1],
            p: 0.2,
            draws: 100,
            negative_control: false,
        }
    }
}

fn unit_open(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.train_images,
            &mut cfg.train_labels,
            &mut cfg.test_images,
            &mut cfg.test_labels,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        cfg.check().map_err(|errs| CliError::Config(errs.join("; ")))?;
        Ok(cfg)
    }

    /// Every problem with the configuration, or nothing.
    pub fn check(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if !unit_open(self.delta) || !unit_open(self.delta_prime) || self.delta + self.delta_prime >= 1.0 {
            errs.push("delta and delta_prime must lie in (0, 1) with delta + delta_prime < 1".into());
        }
        if !unit_open(self.gamma) {
            errs.push(format!("gamma {} must lie in (0, 1)", self.gamma));
        }
        if let Some(grid) = &self.gamma_grid {
            if grid.is_empty() || grid.iter().any(|g| !unit_open(*g)) {
                errs.push("gamma_grid must be a nonempty list of values in (0, 1)".into());
            }
        }
        if self.steps == 0 {
            errs.push("steps must be positive".into());
        }
        if self.repetitions == 0 {
            errs.push("repetitions must be positive".into());
        }
        if self.data == DataSource::Idx && (self.train_images.is_none() || self.train_labels.is_none()) {
            errs.push("data \"idx\" needs train_images and train_labels".into());
        }
        if self.test_images.is_some() != self.test_labels.is_some() {
            errs.push("test_images and test_labels go together".into());
        }
        if self.data == DataSource::Synthetic {
            if crate::data::ThresholdDistribution::new(self.theta_star, self.eta).is_err() {
                errs.push("theta_star must lie in [0, 1] and eta in [0, 0.5)".into());
            }
            if self.n == 0 {
                errs.push("n must be positive".into());
            }
        }
        if self.model == Model::Network && self.mode == Some(EvalMode::Exact) {
            errs.push("mode \"exact\" needs model \"finite\"".into());
        }
        if self.model == Model::Finite && self.class_size == 0 {
            errs.push("class_size must be positive".into());
        }
        if self.model == Model::Network && (self.sigma0 <= 0.0 || self.hidden.contains(&0)) {
            errs.push("sigma0 must be positive and hidden widths nonzero".into());
        }
        if let Err(e) = self.train_config(false).validate() {
            errs.push(e.to_string());
        }
        if self.negative_control && self.harness != Harness::SplitKl {
            errs.push("negative_control only applies to the split-kl harness".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn eval_mode(&self) -> EvalMode {
        self.mode.unwrap_or(match self.model {
            Model::Finite => EvalMode::Exact,
            Model::Network => EvalMode::Sampled,
        })
    }

    pub fn train_config(&self, first: bool) -> TrainConfig {
        let base = match self.model {
            Model::Finite => TrainConfig::finite(),
            Model::Network => TrainConfig::desk(),
        };
        let epochs = if first { self.first_epochs.or(self.epochs) } else { self.epochs };
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            momentum: self.momentum.unwrap_or(base.momentum),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: epochs.unwrap_or(base.epochs),
            seed: 0,
            surrogate: SurrogateConfig {
                c1: self.c1,
                c2: self.c2,
                p_min: self.p_min,
            },
        }
    }

    fn gamma_policy(&self) -> GammaPolicy {
        match &self.gamma_grid {
            Some(g) => GammaPolicy::Grid(g.clone()),
            None => GammaPolicy::Fixed(self.gamma),
        }
    }

    pub fn recursion(&self) -> RecursionConfig {
        RecursionConfig {
            steps: self.steps,
            gamma: self.gamma_policy(),
            delta: self.delta,
            delta_prime: self.delta_prime,
            mode: self.eval_mode(),
            train_first: self.train_config(true),
            train_rest: self.train_config(false),
            seed: self.seed,
        }
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            delta: self.delta,
            delta_prime: self.delta_prime,
            mode: self.eval_mode(),
            train_prior: self.train_config(true),
            train_posterior: self.train_config(false),
            seed: self.seed,
        }
    }

    fn setup(&self) -> ThresholdSetup {
        ThresholdSetup {
            class_size: self.class_size,
            theta_star: self.theta_star,
            eta: self.eta,
        }
    }

    /// Training and (optional) test data.
    pub fn load_data(&self) -> CliResult<(Dataset, Option<Dataset>)> {
        match self.data {
            DataSource::Synthetic => {
                let s = self.setup();
                let train = s.sample(self.n, derive_seed(self.seed, "data", 0))?;
                let test = s.sample(self.n_test, derive_seed(self.seed, "test-data", 0))?;
                Ok((train, (self.n_test > 0).then_some(test)))
            }
            DataSource::Idx => {
                let (Some(img), Some(lab)) = (&self.train_images, &self.train_labels) else {
                    return Err(CliError::Config("missing IDX paths".into()));
                };
                let mut train = load_idx(img, lab)?;
                if let Some(k) = self.subsample {
                    train = train.stratified_subsample(k, derive_seed(self.seed, "subsample", 0))?;
                }
                let test = match (&self.test_images, &self.test_labels) {
                    (Some(i), Some(l)) => {
                        let mut t = load_idx(i, l)?;
                        if let Some(k) = self.test_subsample {
                            t = t.stratified_subsample(k, derive_seed(self.seed, "test-subsample", 0))?;
                        }
                        Some(t)
                    }
                    _ => None,
                };
                Ok((train, test))
            }
        }
    }

    /// The data-independent prior `π_0`.
    pub fn prior(&self, data: &Dataset) -> CliResult<HypothesisDistribution> {
        match self.model {
            Model::Finite => Ok(self.setup().uniform_prior()?),
            Model::Network => {
                let mut widths = vec![data.dim()];
                widths.extend(&self.hidden);
                widths.push(data.num_classes);
                let arch = Architecture::new(widths)?;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, "prior-init", 0));
                Ok(HypothesisDistribution::Network(GaussianNetworkDistribution::random_prior(
                    arch,
                    self.sigma0,
                    &mut rng,
                )?))
            }
        }
    }
}

/// A stored distribution with where its randomness came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub step: usize,
    pub gamma: Option<f64>,
    pub seeds: BTreeMap<String, u64>,
    pub distribution: HypothesisDistribution,
}

pub const CHECKPOINT_FORMAT: &str = "rpb-checkpoint/1";

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn recursion_seeds(root: u64, steps: usize) -> BTreeMap<String, u64> {
    let s = StepSeeds::new(root);
    let mut m = BTreeMap::new();
    m.insert("root".to_string(), root);
    m.insert("data".to_string(), derive_seed(root, "data", 0));
    m.insert("prior-init".to_string(), derive_seed(root, "prior-init", 0));
    m.insert("split".to_string(), s.split());
    for t in 1..=steps {
        m.insert(format!("trainer[{t}]"), s.trainer(t));
        m.insert(format!("prior-draws[{t}]"), s.prior(t));
        m.insert(format!("posterior-draws[{t}]"), s.posterior(t));
        m.insert(format!("test-draws[{t}]"), s.test(t));
    }
    m
}

#[derive(Debug, Serialize, Deserialize)]
struct RunDocument<T> {
    config: ExperimentConfig,
    seeds: BTreeMap<String, u64>,
    n_train: usize,
    n_test: Option<usize>,
    result: T,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecursiveResult {
    chunk_sizes: Vec<usize>,
    gammas: Vec<f64>,
    train01: f64,
    trace: BoundTrace,
}

/// Summary row of one run, in the Table-1 layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub train01: f64,
    pub test01: Option<f64>,
    pub bound: f64,
}

fn run_rpb(cfg: &ExperimentConfig, out: &Path) -> CliResult<Row> {
    let (data, test) = cfg.load_data()?;
    let pi0 = cfg.prior(&data)?;
    let rc = cfg.recursion();
    let outcome = run_recursive(&data, test.as_ref(), &pi0, &rc)?;
    let seeds = recursion_seeds(cfg.seed, cfg.steps);
    let final_post = outcome.posteriors.last().unwrap();
    let train01 = empirical_gibbs_loss(final_post, &data.view(), rc.mode, derive_seed(cfg.seed, "train-draws", 0))?
        .0
        .get();

    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let mut paths = Vec::new();
    for (t, dist) in std::iter::once(&pi0).chain(&outcome.posteriors).enumerate() {
        let path = ckpt_dir.join(format!("posterior_{t}.json"));
        let gamma = if t >= 2 { Some(outcome.gammas[t - 2]) } else { None };
        let c = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            step: t,
            gamma,
            seeds: seeds.clone(),
            distribution: dist.clone(),
        };
        write_json(&path, &c)?;
        paths.push(path);
    }

    // Recompute every bound from the checkpoints as written.
    let loaded: Vec<Checkpoint> = paths.iter().map(|p| read_json(p)).collect::<CliResult<_>>()?;
    let dists: Vec<HypothesisDistribution> = loaded.into_iter().map(|c| c.distribution).collect();
    let order = split_order(data.len(), StepSeeds::new(cfg.seed).split());
    let again = evaluate_recursive(
        &dists[1..],
        &dists[0],
        &outcome.gammas,
        &outcome.schedule,
        &data,
        &order,
        &rc,
        test.as_ref(),
    )?;
    if again != outcome.trace {
        return Err(CliError::Runtime(Error::InvalidParameter(
            "bounds recomputed from checkpoints differ from the emitted trace".into(),
        )));
    }

    let mut csv = Vec::new();
    outcome.trace.write_csv(&mut csv)?;
    fs::write(out.join("trace.csv"), &csv)?;
    let doc = RunDocument {
        config: cfg.clone(),
        seeds,
        n_train: data.len(),
        n_test: test.as_ref().map(Dataset::len),
        result: RecursiveResult {
            chunk_sizes: outcome.schedule.chunk_sizes.clone(),
            gammas: outcome.gammas.clone(),
            train01,
            trace: outcome.trace.clone(),
        },
    };
    write_json(&out.join("trace.json"), &doc)?;
    Ok(Row {
        train01,
        test01: outcome.trace.steps.last().and_then(|s| s.test01),
        bound: outcome.trace.final_bound(),
    })
}

fn baseline_seeds(root: u64) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    m.insert("root".to_string(), root);
    for label in [
        "data",
        "prior-init",
        "prior-trainer",
        "erm-trainer",
        "trainer",
        "posterior-draws",
        "train-draws",
        "test-draws",
    ] {
        m.insert(label.to_string(), derive_seed(root, label, 0));
    }
    m.insert("split".to_string(), StepSeeds::new(root).split());
    m
}

fn run_method_baseline(cfg: &ExperimentConfig, method: BaselineMethod, out: &Path) -> CliResult<Row> {
    let (data, test) = cfg.load_data()?;
    let pi0 = cfg.prior(&data)?;
    let bc = cfg.baseline();
    let report = run_baseline(method, &data, test.as_ref(), &pi0, &bc)?;
    let doc = RunDocument {
        config: cfg.clone(),
        seeds: baseline_seeds(cfg.seed),
        n_train: data.len(),
        n_test: test.as_ref().map(Dataset::len),
        result: report.clone(),
    };
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let json_path = out.join("report.json");
    write_json(&json_path, &doc)?;
    write_json(
        &ckpt_dir.join("posterior.json"),
        &Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            step: 1,
            gamma: None,
            seeds: doc.seeds.clone(),
            distribution: report.posterior.clone(),
        },
    )?;

    let loaded: RunDocument<BaselineReport> = read_json(&json_path)?;
    let again = recompute_bound(&loaded.result, &data, &pi0, &bc)?;
    if again != report.bound {
        return Err(CliError::Runtime(Error::InvalidParameter(format!(
            "bound recomputed from the stored report ({again}) differs from {}",
            report.bound
        ))));
    }
    let row = Row {
        train01: report.train01,
        test01: report.test01,
        bound: report.bound,
    };
    fs::write(out.join("report.csv"), table_csv(&[(method.tag().to_string(), vec![row])])?)?;
    Ok(row)
}

/// Runs the configured method, writing its outputs into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> CliResult<Row> {
    fs::create_dir_all(out)?;
    match cfg.method.baseline() {
        None => run_rpb(cfg, out),
        Some(m) => run_method_baseline(cfg, m, out),
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `method,train01,test01,bound`, plus standard deviations when any method
/// was repeated.
pub fn table_csv(rows: &[(String, Vec<Row>)]) -> CliResult<Vec<u8>> {
    let with_sd = rows.iter().any(|(_, r)| r.len() > 1);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method", "train01", "test01", "bound"];
    if with_sd {
        header.extend(["train01_sd", "test01_sd", "bound_sd"]);
    }
    w.write_record(&header).map_err(Error::from)?;
    for (method, runs) in rows {
        let train: Vec<f64> = runs.iter().map(|r| r.train01).collect();
        let bound: Vec<f64> = runs.iter().map(|r| r.bound).collect();
        let test: Option<Vec<f64>> = runs.iter().map(|r| r.test01).collect();
        let (tm, ts) = mean_sd(&train);
        let (bm, bs) = mean_sd(&bound);
        let (em, es) = match &test {
            Some(t) => {
                let (m, s) = mean_sd(t);
                (m.to_string(), s.to_string())
            }
            None => (String::new(), String::new()),
        };
        let mut rec = vec![method.clone(), tm.to_string(), em, bm.to_string()];
        if with_sd {
            rec.extend([ts.to_string(), es, bs.to_string()]);
        }
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(Error::Io(e.into_error())))
}

fn cmd_validate(cfg: &ExperimentConfig, trials: usize, out: &Path) -> CliResult<CoverageReport> {
    if cfg.model != Model::Finite {
        return Err(CliError::Config("coverage harnesses use the finite threshold model".into()));
    }
    let setup = cfg.setup();
    let train = cfg.train_config(false);
    let seed = cfg.seed;
    let report = match cfg.harness {
        Harness::Kl => coverage_kl(cfg.p, cfg.n, cfg.delta, trials, seed)?,
        Harness::SplitKl => {
            let support =
                DiscreteSupport::new(cfg.support.clone()).map_err(|e| CliError::Config(e.to_string()))?;
            let variant = if cfg.negative_control {
                BoundVariant::NegativeControl
            } else {
                BoundVariant::Correct
            };
            coverage_split_kl(&support, &cfg.weights, cfg.n, cfg.delta, trials, seed, variant)
                .map_err(|e| CliError::Config(e.to_string()))?
        }
        Harness::PacBayesKl => coverage_pb_kl(&setup, cfg.n, cfg.delta, trials, seed, &train)?,
        Harness::PacBayesSplitKl => coverage_pb_split_kl(&setup, cfg.n, cfg.gamma, cfg.delta, trials, seed, &train)?,
        Harness::Sampling => coverage_sampling(&setup, cfg.n, cfg.draws, cfg.delta_prime, trials, seed)?,
        Harness::Recursive => {
            coverage_recursive(&setup, cfg.n, cfg.steps, cfg.delta, cfg.gamma_policy(), trials, seed, &train)?
        }
        Harness::Uninformed => coverage_baseline(BaselineMethod::Uninformed, &setup, cfg.n, cfg.delta, trials, seed, &train)?,
        Harness::Informed => coverage_baseline(BaselineMethod::Informed, &setup, cfg.n, cfg.delta, trials, seed, &train)?,
        Harness::InformedExcess => {
            coverage_baseline(BaselineMethod::InformedExcess, &setup, cfg.n, cfg.delta, trials, seed, &train)?
        }
    };
    fs::create_dir_all(out)?;
    write_json(&out.join("coverage.json"), &report)?;
    fs::write(
        out.join("coverage.csv"),
        format!("{}\n{}\n", CoverageReport::CSV_HEADER, report.csv_line()),
    )?;
    Ok(report)
}

/// Executes one parsed command, printing its summary to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Split { n, steps } => {
            let s = geometric_split(n, steps).map_err(|e| CliError::Config(e.to_string()))?;
            let sizes: Vec<String> = s.chunk_sizes.iter().map(usize::to_string).collect();
            writeln!(stdout, "{}", sizes.join(","))?;
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            run_experiment(&cfg, &out)?;
            let name = if cfg.method == Method::Rpb { "trace.csv" } else { "report.csv" };
            stdout.write_all(&fs::read(out.join(name))?)?;
        }
        Command::Validate { config, trials, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            let report = cmd_validate(&cfg, trials.unwrap_or(cfg.trials), &out)?;
            writeln!(stdout, "{}\n{}", CoverageReport::CSV_HEADER, report.csv_line())?;
            if !report.passes() {
                return Err(CliError::Validation(format!(
                    "{}: coverage {} below {} - {}",
                    report.name, report.coverage, report.level, report.slack
                )));
            }
        }
        Command::Compare { configs, out } => {
            let loaded: Vec<ExperimentConfig> =
                configs.iter().map(|p| ExperimentConfig::load(p)).collect::<CliResult<_>>()?;
            let out = out.unwrap_or_else(|| loaded[0].out_dir.clone());
            let mut rows = Vec::new();
            for (i, cfg) in loaded.iter().enumerate() {
                let mut runs = Vec::new();
                for rep in 0..cfg.repetitions {
                    let c = ExperimentConfig {
                        seed: cfg.seed + rep as u64,
                        ..cfg.clone()
                    };
                    let dir = out.join(format!("{i}-{}", cfg.method.tag())).join(format!("rep{rep}"));
                    runs.push(run_experiment(&c, &dir)?);
                }
                rows.push((cfg.method.tag().to_string(), runs));
            }
            let table = table_csv(&rows)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("compare.csv"), &table)?;
            stdout.write_all(&table)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
