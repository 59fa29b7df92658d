//! Cross-validated AUC maximization on LIBSVM datasets.
//!
//! Each dataset is scaled, split into stratified folds, and for every
//! (repeat, fold) cell a method maximizes training AUC; the reported number is
//! the AUC of the returned weights on the held-out fold. Cells run on a
//! bounded rayon pool and results are aggregated in a fixed order, so output
//! does not depend on scheduling.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use dfotr::baselines::{hinge_gradient_descent, random_search, GradientDescentConfig};
use dfotr::data::{make_folds, read_libsvm_file, scale_features, LabeledDataset, ScalingMode};
use dfotr::objectives::{auc, AucObjective, Negated};
use dfotr::{minimize, minimize_stochastic, Objective, SolverConfig, SubsampledObjective};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::report::Table;
use crate::{derive_seed, mean_std};

pub const DATA_DIR_ENV: &str = "DFOTR_DATA_DIR";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub scaling: Option<ScalingMode>,
    pub budget: usize,
    #[serde(default)]
    pub big: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    5
}

impl HarnessConfig {
    /// Parses a TOML config; relative dataset paths resolve against
    /// `data_dir`, then the config file's directory. The `DFOTR_DATA_DIR`
    /// environment variable overrides both.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: HarnessConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let root = match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => match &cfg.data_dir {
                Some(d) if d.is_relative() => base.join(d),
                Some(d) => d.clone(),
                None => base,
            },
        };
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = root.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn find(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

impl DatasetEntry {
    pub fn load(&self) -> anyhow::Result<LabeledDataset> {
        if !self.path.exists() {
            bail!(
                "dataset `{}` not found at {} (set {DATA_DIR_ENV} to its directory)",
                self.name,
                self.path.display()
            );
        }
        let raw = read_libsvm_file(&self.path)
            .with_context(|| format!("loading dataset `{}`", self.name))?;
        Ok(match self.scaling {
            Some(mode) => scale_features(&raw, mode),
            None => raw,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    DfoTr,
    RandomSearch,
    HingeGd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DfoTr => "dfo-tr",
            Method::RandomSearch => "random-search",
            Method::HingeGd => "hinge-gd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "dfo-tr" | "dfotr" => Ok(Method::DfoTr),
            "random-search" | "random" => Ok(Method::RandomSearch),
            "hinge-gd" | "hinge" => Ok(Method::HingeGd),
            _ => Err(anyhow!(
                "unknown method `{s}` (expected dfo-tr, random-search or hinge-gd)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Full-data objective, `w0 = 0`.
    Deterministic,
    /// Subsampled objective, `w0` uniform in `[-1, 1]^d`.
    Stochastic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Deterministic => "deterministic",
            Mode::Stochastic => "stochastic",
        }
    }

    pub fn default_repeats(self) -> usize {
        match self {
            Mode::Deterministic => 1,
            Mode::Stochastic => 4,
        }
    }
}

impl FromStr for Mode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "deterministic" | "det" => Ok(Mode::Deterministic),
            "stochastic" | "sto" => Ok(Mode::Stochastic),
            _ => Err(anyhow!(
                "unknown mode `{s}` (expected deterministic or stochastic)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AucOptions {
    pub methods: Vec<Method>,
    pub mode: Mode,
    pub repeats: usize,
    pub seed: u64,
    /// Overrides the per-dataset budget.
    pub budget: Option<usize>,
    pub jobs: usize,
    pub timing: bool,
}

impl Default for AucOptions {
    fn default() -> Self {
        AucOptions {
            methods: vec![Method::DfoTr],
            mode: Mode::Deterministic,
            repeats: 1,
            seed: 0,
            budget: None,
            jobs: 1,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub repeat: usize,
    pub fold: usize,
    pub train_auc: f64,
    pub test_auc: f64,
    pub evals: usize,
    pub samples: usize,
    /// Wall time outside objective evaluations.
    pub optimizer_time: Duration,
}

#[derive(Debug, Clone)]
pub struct AucSummary {
    pub dataset: String,
    pub method: Method,
    pub mode: Mode,
    pub budget: usize,
    pub cells: Vec<CellResult>,
}

impl AucSummary {
    pub fn test_mean_std(&self) -> (f64, f64) {
        mean_std(&self.cells.iter().map(|c| c.test_auc).collect::<Vec<_>>())
    }

    pub fn optimizer_seconds(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.optimizer_time.as_secs_f64())
            .sum()
    }
}

/// Accumulates wall time spent inside the wrapped objective.
struct Timed<O> {
    inner: O,
    spent: Duration,
}

impl<O: Objective> Objective for Timed<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&mut self, w: &[f64]) -> dfotr::Result<f64> {
        let t = Instant::now();
        let v = self.inner.evaluate(w);
        self.spent += t.elapsed();
        v
    }
}

impl<O: SubsampledObjective> SubsampledObjective for Timed<O> {
    fn class_sizes(&self) -> (usize, usize) {
        self.inner.class_sizes()
    }

    fn evaluate_sampled(
        &mut self,
        w: &[f64],
        n_pos: usize,
        n_neg: usize,
        rng: &mut dyn RngCore,
    ) -> dfotr::Result<f64> {
        let t = Instant::now();
        let v = self.inner.evaluate_sampled(w, n_pos, n_neg, rng);
        self.spent += t.elapsed();
        v
    }
}

/// Trains one method on `train` and reports its held-out AUC.
pub fn run_cell(
    method: Method,
    mode: Mode,
    train: &Arc<LabeledDataset>,
    budget: usize,
    seed: u64,
) -> anyhow::Result<(Vec<f64>, usize, usize, Duration)> {
    let d = train.dim;
    let start = Instant::now();
    let mut obj = Timed {
        inner: Negated(AucObjective::new(Arc::clone(train))?),
        spent: Duration::ZERO,
    };
    let (w, evals, samples) = match method {
        Method::DfoTr => {
            let config = SolverConfig::defaults(d)
                .with_budget(budget)
                .with_seed(seed);
            match mode {
                Mode::Deterministic => {
                    let h = minimize(&mut obj, &vec![0.0; d], &config)?;
                    let n = h.evals_used() * train.len();
                    (h.best.point.as_slice().to_vec(), h.evals_used(), n)
                }
                Mode::Stochastic => {
                    let w0 = random_start(d, seed);
                    let h = minimize_stochastic(&mut obj, &w0, &config)?;
                    let n = h.total_samples();
                    (h.final_center.point.as_slice().to_vec(), h.evals_used(), n)
                }
            }
        }
        Method::RandomSearch => {
            let h = random_search(&mut obj, &vec![(-1.0, 1.0); d], budget, seed)?;
            let n = h.evals_used() * train.len();
            (h.best.point.as_slice().to_vec(), h.evals_used(), n)
        }
        Method::HingeGd => {
            let config = GradientDescentConfig {
                max_iters: budget,
                ..GradientDescentConfig::default()
            };
            let t = Instant::now();
            let run = hinge_gradient_descent(train, &vec![0.0; d], &config)?;
            obj.spent += t.elapsed();
            let evals = run.history.evals_used();
            (run.weights, evals, evals * train.len())
        }
    };
    let optimizer_time = start.elapsed().saturating_sub(obj.spent);
    Ok((w, evals, samples, optimizer_time))
}

/// `w0` for stochastic runs: uniform in `[-1, 1]^d`.
pub fn random_start(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5747, 0));
    (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

pub fn run_dataset(entry: &DatasetEntry, opts: &AucOptions) -> anyhow::Result<Vec<AucSummary>> {
    let data = entry.load()?;
    run_on_data(&entry.name, &data, entry.folds, entry.budget, opts)
}

pub fn run_on_data(
    name: &str,
    data: &LabeledDataset,
    folds: usize,
    default_budget: usize,
    opts: &AucOptions,
) -> anyhow::Result<Vec<AucSummary>> {
    let budget = opts.budget.unwrap_or(default_budget);
    let repeats = opts.repeats.max(1);
    let mut splits = Vec::new();
    for r in 0..repeats {
        let plan = make_folds(data, folds, derive_seed(opts.seed, r as u64, u64::MAX))
            .with_context(|| format!("splitting `{name}`"))?;
        for f in 0..folds {
            let (train, test) = plan.split(data, f);
            splits.push((r, f, Arc::new(train), Arc::new(test)));
        }
    }
    let mut tasks = Vec::new();
    for &m in &opts.methods {
        for (i, _) in splits.iter().enumerate() {
            tasks.push((m, i));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .context("building worker pool")?;
    let results: Vec<anyhow::Result<(Method, CellResult)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, i)| {
                let (r, f, train, test) = &splits[i];
                let seed = derive_seed(opts.seed, *r as u64, *f as u64);
                let (w, evals, samples, optimizer_time) =
                    run_cell(m, opts.mode, train, budget, seed)
                        .with_context(|| format!("{name}: {m} repeat {r} fold {f}"))?;
                Ok((
                    m,
                    CellResult {
                        repeat: *r,
                        fold: *f,
                        train_auc: auc(&w, train)?,
                        test_auc: auc(&w, test)?,
                        evals,
                        samples,
                        optimizer_time,
                    },
                ))
            })
            .collect()
    });
    let mut summaries: Vec<AucSummary> = Vec::new();
    for res in results {
        let (m, cell) = res?;
        match summaries.iter_mut().find(|s| s.method == m) {
            Some(s) => s.cells.push(cell),
            None => summaries.push(AucSummary {
                dataset: name.to_string(),
                method: m,
                mode: opts.mode,
                budget,
                cells: vec![cell],
            }),
        }
    }
    for s in &mut summaries {
        s.cells.sort_by_key(|c| (c.repeat, c.fold));
    }
    summaries.sort_by_key(|s| s.method);
    Ok(summaries)
}

pub fn summary_table(summaries: &[AucSummary], opts: &AucOptions, config: Option<&Path>) -> Table {
    let mut cols = vec![
        "dataset",
        "method",
        "mode",
        "budget",
        "runs",
        "mean_auc",
        "std_auc",
        "mean_train_auc",
    ];
    if opts.timing {
        cols.push("optimizer_seconds");
    }
    let mut t = Table::new(&cols);
    t.meta("command", "auc");
    if let Some(c) = config {
        t.meta("config", c.display());
    }
    t.meta("mode", opts.mode.name())
        .meta("repeats", opts.repeats)
        .meta("seed", opts.seed)
        .meta(
            "methods",
            opts.methods
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(" "),
        )
        .meta(
            "budget",
            opts.budget
                .map_or("per-dataset".to_string(), |b| b.to_string()),
        );
    let mut sorted: Vec<&AucSummary> = summaries.iter().collect();
    sorted.sort_by(|a, b| (&a.dataset, a.method).cmp(&(&b.dataset, b.method)));
    for s in sorted {
        let (mean, std) = s.test_mean_std();
        let (train, _) = mean_std(&s.cells.iter().map(|c| c.train_auc).collect::<Vec<_>>());
        let mut row = vec![
            s.dataset.clone(),
            s.method.name().to_string(),
            s.mode.name().to_string(),
            s.budget.to_string(),
            s.cells.len().to_string(),
            format!("{mean}"),
            format!("{std}"),
            format!("{train}"),
        ];
        if opts.timing {
            row.push(format!("{:.6}", s.optimizer_seconds()));
        }
        t.push(row);
    }
    t
}
