//! Benchmark tables: best-so-far gap to the known optimum at fixed
//! evaluation counts, for DFO-TR from the origin and for random search over
//! the benchmark's box.

use dfotr::baselines::random_search;
use dfotr::objectives::Benchmark;
use dfotr::{minimize, RunHistory, SolverConfig};

use crate::report::Table;

/// Evaluation counts at which the gap is reported.
pub fn checkpoints(b: Benchmark) -> &'static [usize] {
    match b {
        Benchmark::Branin => &[1, 5, 11, 100],
        Benchmark::Camelback => &[1, 10, 21, 100],
        Benchmark::Hartmann6 => &[1, 25, 64, 250],
    }
}

pub fn default_budget(b: Benchmark) -> usize {
    *checkpoints(b).last().expect("non-empty checkpoint list")
}

pub fn run_dfo(b: Benchmark, budget: usize, seed: u64) -> dfotr::Result<RunHistory> {
    let d = b.dimension();
    let config = SolverConfig::defaults(d)
        .with_budget(budget)
        .with_seed(seed);
    let mut f = b;
    minimize(&mut f, &vec![0.0; d], &config)
}

pub fn run_random(b: Benchmark, budget: usize, seed: u64) -> dfotr::Result<RunHistory> {
    let mut f = b;
    random_search(&mut f, &b.domain(), budget, seed)
}

/// `f_best − f_opt` after each checkpoint (`NaN` past the end of the run).
pub fn gaps(b: Benchmark, history: &RunHistory, at: &[usize]) -> Vec<f64> {
    at.iter()
        .map(|&n| history.best_after(n).map_or(f64::NAN, |v| v - b.f_opt()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    DfoTr,
    RandomSearch,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::DfoTr => "dfo-tr",
            BenchMethod::RandomSearch => "random-search",
        }
    }

    pub fn run(self, b: Benchmark, budget: usize, seed: u64) -> dfotr::Result<RunHistory> {
        match self {
            BenchMethod::DfoTr => run_dfo(b, budget, seed),
            BenchMethod::RandomSearch => run_random(b, budget, seed),
        }
    }
}

pub fn run_benchmark(
    b: Benchmark,
    budget: usize,
    seeds: &[u64],
    methods: &[BenchMethod],
) -> dfotr::Result<Table> {
    let at: Vec<usize> = checkpoints(b)
        .iter()
        .copied()
        .filter(|&c| c <= budget)
        .collect();
    let mut table = Table::new(&["benchmark", "method", "seed", "evals", "delta_f"]);
    table
        .meta("command", "bench")
        .meta("benchmark", b.name())
        .meta("budget", budget)
        .meta(
            "seeds",
            seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        )
        .meta("f_opt", b.f_opt());
    for &seed in seeds {
        for &method in methods {
            let h = method.run(b, budget, seed)?;
            for (n, g) in at.iter().zip(gaps(b, &h, &at)) {
                table.push(vec![
                    b.name().to_string(),
                    method.name().to_string(),
                    seed.to_string(),
                    n.to_string(),
                    format!("{g:e}"),
                ]);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_columns() {
        assert_eq!(checkpoints(Benchmark::Hartmann6), &[1, 25, 64, 250]);
        assert_eq!(default_budget(Benchmark::Camelback), 100);
    }

    #[test]
    fn branin_table_has_four_rows_per_method() {
        let t = run_benchmark(
            Benchmark::Branin,
            100,
            &[0],
            &[BenchMethod::DfoTr, BenchMethod::RandomSearch],
        )
        .unwrap();
        assert_eq!(t.rows.len(), 8);
        let last: f64 = t.rows[3][4].parse().unwrap();
        assert!(last <= 1e-4, "{last}");
    }
}
