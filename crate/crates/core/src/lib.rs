//! Model-based trust-region derivative-free optimization (DFO-TR).
//!
//! The solver builds a quadratic surrogate from previously evaluated points,
//! minimizes it globally inside a ball and moves or shrinks the ball depending
//! on how well the surrogate predicted the actual change. Alongside the solver
//! the crate ships the objectives it is typically pointed at: the empirical
//! AUC of a linear scorer, its closed-form expectation under Gaussian classes,
//! and three classic nonconvex benchmarks.
//!
//! ```
//! use dfotr::{minimize, objectives::Benchmark, SolverConfig};
//!
//! let mut f = Benchmark::Branin;
//! let config = SolverConfig::defaults(2);
//! let history = minimize(&mut f, &[0.0, 0.0], &config).unwrap();
//! assert!(history.best.value - 0.397887 < 1e-3);
//! ```

pub mod baselines;
pub mod data;
mod error;
pub mod model;
pub mod objectives;
pub mod solver;
pub mod trsub;
mod types;

pub use error::{Error, Result};
pub use solver::{
    minimize, minimize_stochastic, sample_schedule, IterationRecord, RunHistory, Solver, SolverMode,
};
pub use types::{
    EvaluatedPoint, FnObjective, InterpolationSet, Objective, Point, SolverConfig,
    SubsampledObjective, TrustRegionState,
};
