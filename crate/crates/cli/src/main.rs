use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dfotr::objectives::Benchmark;
use dfotr_cli::auc::{self, AucOptions, HarnessConfig, Method, Mode};
use dfotr_cli::bench::{self, BenchMethod};
use dfotr_cli::tune::{self, ParamSpec, TuneOptions};

#[derive(Parser)]
#[command(
    name = "dfotr",
    version,
    about = "Derivative-free trust-region experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Best-so-far gap tables on branin, camelback or hartmann6.
    Bench(BenchArgs),
    /// Random search on a benchmark, same table layout as `bench`.
    RandomSearch(BenchArgs),
    /// Cross-validated AUC maximization on LIBSVM datasets.
    Auc(AucArgs),
    /// Tune the hyperparameters of an external program.
    Tune(TuneArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// branin, camelback or hartmann6
    benchmark: String,
    #[arg(long)]
    budget: Option<usize>,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Also run random search (only for `bench`).
    #[arg(long)]
    with_random: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AucArgs {
    /// Dataset registry (TOML).
    #[arg(long, default_value = "data/datasets.toml")]
    config: PathBuf,
    /// Restrict to these datasets (repeatable); default: every non-big entry.
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    /// Include entries marked `big`.
    #[arg(long)]
    big: bool,
    /// dfo-tr, random-search or hinge-gd (repeatable).
    #[arg(long = "method", default_values_t = vec![Method::DfoTr])]
    methods: Vec<Method>,
    #[arg(long, default_value = "deterministic")]
    mode: Mode,
    /// Repetitions of the fold split; default 1 (deterministic) or 4 (stochastic).
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Add wall-clock optimizer time (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// name:lo:hi or name:lo:hi:log (repeatable).
    #[arg(long = "param", required = true)]
    params: Vec<ParamSpec>,
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds to wait for each answer.
    #[arg(long, default_value_t = tune::DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    /// Keep one process alive and send one line per evaluation.
    #[arg(long)]
    persistent: bool,
    /// Also run random search with the same budget.
    #[arg(long)]
    random_search: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// The program and its arguments.
    #[arg(last = true, required = true)]
    command: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Cmd::Bench(a) => {
            let mut methods = vec![BenchMethod::DfoTr];
            if a.with_random {
                methods.push(BenchMethod::RandomSearch);
            }
            bench_cmd(&a, &methods)
        }
        Cmd::RandomSearch(a) => bench_cmd(&a, &[BenchMethod::RandomSearch]),
        Cmd::Auc(a) => auc_cmd(a).map(|_| ExitCode::SUCCESS),
        Cmd::Tune(a) => tune_cmd(a).map(|_| ExitCode::SUCCESS),
    }
}

fn bench_cmd(a: &BenchArgs, methods: &[BenchMethod]) -> anyhow::Result<ExitCode> {
    let Some(b) = Benchmark::from_name(&a.benchmark) else {
        eprintln!(
            "error: unknown benchmark `{}` (expected branin, camelback or hartmann6)",
            a.benchmark
        );
        return Ok(ExitCode::from(2));
    };
    let budget = a.budget.unwrap_or_else(|| bench::default_budget(b));
    let seeds: Vec<u64> = (0..a.seeds).map(|i| a.seed + i).collect();
    let table = bench::run_benchmark(b, budget, &seeds, methods)?;
    table.emit(a.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn auc_cmd(a: AucArgs) -> anyhow::Result<()> {
    let cfg = HarnessConfig::load(&a.config)?;
    let entries: Vec<_> = if a.datasets.is_empty() {
        cfg.datasets.iter().filter(|d| a.big || !d.big).collect()
    } else {
        a.datasets
            .iter()
            .map(|n| {
                cfg.find(n).with_context(|| {
                    format!("dataset `{n}` is not listed in {}", a.config.display())
                })
            })
            .collect::<anyhow::Result<_>>()?
    };
    if entries.is_empty() {
        bail!("no datasets selected");
    }
    let opts = AucOptions {
        methods: a.methods,
        mode: a.mode,
        repeats: a.repeats.unwrap_or_else(|| a.mode.default_repeats()),
        seed: a.seed,
        budget: a.budget,
        jobs: a.jobs.max(1),
        timing: a.timing,
    };
    let mut summaries = Vec::new();
    for entry in entries {
        summaries.extend(auc::run_dataset(entry, &opts)?);
    }
    auc::summary_table(&summaries, &opts, Some(&a.config)).emit(a.out.as_deref())?;
    Ok(())
}

fn tune_cmd(a: TuneArgs) -> anyhow::Result<()> {
    if !(a.timeout.is_finite() && a.timeout > 0.0) {
        bail!("--timeout must be positive");
    }
    let opts = TuneOptions {
        params: a.params,
        budget: a.budget,
        seed: a.seed,
        timeout: Duration::from_secs_f64(a.timeout),
        persistent: a.persistent,
        random_search: a.random_search,
    };
    let outcomes = tune::tune(&a.command, &opts)?;
    tune::outcome_table(&outcomes, &a.command, &opts).emit(a.out.as_deref())?;
    Ok(())
}
