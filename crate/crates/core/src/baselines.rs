//! Reference methods: uniform random search over a box, and gradient descent
//! on the pairwise hinge surrogate of the AUC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::objectives::{auc, pairwise_hinge};
use crate::solver::EvaluationLog;
use crate::{
    Error, EvaluatedPoint, IterationRecord, Objective, Point, Result, RunHistory, SolverConfig,
    SolverMode,
};

/// Records one evaluation per iteration; `rho` is NaN and the radius fields
/// are zero since neither method has a trust region.
struct Recorder {
    records: Vec<IterationRecord>,
    evaluations: Vec<EvaluationLog>,
    best: Option<EvaluatedPoint>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            records: Vec::new(),
            evaluations: Vec::new(),
            best: None,
        }
    }

    fn push(&mut self, point: Point, value: f64) -> Result<()> {
        let ep = EvaluatedPoint::new(point, value)?;
        let improved = self.best.as_ref().is_none_or(|b| value < b.value);
        if improved {
            self.best = Some(ep.clone());
        }
        self.evaluations.push(EvaluationLog {
            value,
            n_pos: 0,
            n_neg: 0,
            resample: false,
        });
        let f_best = self.best.as_ref().map_or(value, |b| b.value);
        self.records.push(IterationRecord {
            iteration: self.records.len() + 1,
            candidate: ep.point,
            f_candidate: value,
            rho: f64::NAN,
            delta_before: 0.0,
            delta_after: 0.0,
            accepted: improved,
            m_size: 0,
            sample_size_pos: 0,
            sample_size_neg: 0,
            f_best,
            evals_used: self.evaluations.len(),
        });
        Ok(())
    }

    fn finish(self, config: SolverConfig, last: EvaluatedPoint) -> RunHistory {
        RunHistory {
            records: self.records,
            best: self.best.unwrap_or_else(|| last.clone()),
            final_center: last,
            config,
            mode: SolverMode::Deterministic,
            evaluations: self.evaluations,
        }
    }
}

/// Evaluates `budget` points drawn uniformly from the box and keeps the best.
pub fn random_search<O: Objective + ?Sized>(
    objective: &mut O,
    bounds: &[(f64, f64)],
    budget: usize,
    seed: u64,
) -> Result<RunHistory> {
    let d = objective.dim();
    if bounds.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bounds.len(),
        });
    }
    if let Some((lo, hi)) = bounds
        .iter()
        .find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
    {
        return Err(Error::InvalidBox(format!("[{lo}, {hi}]")));
    }
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = Recorder::new();
    for _ in 0..budget {
        let x: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        let v = objective.evaluate(&x)?;
        rec.push(Point::new(x)?, v)?;
    }
    let best = rec.best.clone().expect("budget >= 1");
    Ok(rec.finish(
        SolverConfig::defaults(d)
            .with_budget(budget)
            .with_seed(seed),
        best,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientDescentConfig {
    pub initial_step: f64,
    pub max_iters: usize,
    /// Stop once the loss changes by at most this fraction.
    pub rel_tol: f64,
}

impl Default for GradientDescentConfig {
    fn default() -> Self {
        GradientDescentConfig {
            initial_step: 1.0,
            max_iters: 100,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradientDescentRun {
    pub weights: Vec<f64>,
    /// Hinge loss at the start and after every iteration.
    pub losses: Vec<f64>,
    /// Negated training AUC of each iterate.
    pub history: RunHistory,
}

/// Subgradient descent on the mean pairwise hinge loss with step halving
/// until the loss decreases.
pub fn hinge_gradient_descent(
    data: &LabeledDataset,
    w0: &[f64],
    config: &GradientDescentConfig,
) -> Result<GradientDescentRun> {
    if !(config.initial_step.is_finite() && config.initial_step > 0.0) {
        return Err(Error::InvalidConfig("initial step must be positive".into()));
    }
    let mut w = w0.to_vec();
    let (mut loss, mut grad) = pairwise_hinge(&w, data)?;
    let mut losses = vec![loss];
    let mut rec = Recorder::new();
    for _ in 0..config.max_iters {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 {
            break;
        }
        let mut t = config.initial_step;
        let mut next = None;
        while t > 1e-12 {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - t * g).collect();
            let (l, g) = pairwise_hinge(&trial, data)?;
            if l < loss {
                next = Some((trial, l, g));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, l, g)) = next else { break };
        let change = (loss - l).abs();
        let prev = loss;
        w = trial;
        loss = l;
        grad = g;
        losses.push(loss);
        rec.push(Point::new(w.clone())?, -auc(&w, data)?)?;
        if change <= config.rel_tol * prev.abs().max(1.0) {
            break;
        }
    }
    let last = match rec.records.last() {
        Some(r) => EvaluatedPoint::new(r.candidate.clone(), r.f_candidate)?,
        None => EvaluatedPoint::new(Point::new(w.clone())?, -auc(&w, data)?)?,
    };
    let history = rec.finish(
        SolverConfig::defaults(data.dim.max(1)).with_budget(config.max_iters.max(1)),
        last,
    );
    Ok(GradientDescentRun {
        weights: w,
        losses,
        history,
    })
}
