//! The trust-region loop and its subsampled variant.
//!
//! Each iteration discards points far from the current center, fits a
//! quadratic model, minimizes it over the trust region and spends exactly one
//! objective evaluation on the resulting candidate. The ratio `ρ` of actual to
//! predicted reduction then drives the interpolation-set update, acceptance
//! and the radius:
//!
//! | `ρ`              | iterate  | radius                         |
//! |------------------|----------|--------------------------------|
//! | `ρ ≥ η1`         | accept   | `γ2 Δ`                         |
//! | `η0 ≤ ρ < η1`    | accept   | `Δ`                            |
//! | `ρ < η0`         | reject   | `γ1 Δ` if `m > d+1`, else `Δ`  |
//!
//! In stochastic mode every evaluation sees a fresh per-class subsample whose
//! size grows with the iteration counter (see [`sample_schedule`]), and after
//! each rejected step the center value is re-estimated on a new subsample and
//! averaged with the stored one. That extra evaluation is charged to the
//! budget.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::build_model;
use crate::trsub::solve_trust_region;
use crate::{
    Error, EvaluatedPoint, InterpolationSet, Objective, Point, Result, SolverConfig,
    SubsampledObjective, TrustRegionState,
};

pub const CSV_HEADER: &str = "iter,rho,delta,f_candidate,f_best,accepted,m,n_pos,n_neg";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Deterministic,
    Stochastic,
}

/// One row of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub candidate: Point,
    pub f_candidate: f64,
    /// Reduction ratio; `-inf` when the step was rejected without a usable
    /// model prediction.
    pub rho: f64,
    pub delta_before: f64,
    pub delta_after: f64,
    pub accepted: bool,
    /// Interpolation-set size the model was built from.
    pub m_size: usize,
    pub sample_size_pos: usize,
    pub sample_size_neg: usize,
    /// Best value seen after this iteration.
    pub f_best: f64,
    pub evals_used: usize,
}

/// A single objective evaluation, in the order they were spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationLog {
    pub value: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Re-estimate of the center after a rejected step.
    pub resample: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
    /// Lowest value ever observed, with its point.
    pub best: EvaluatedPoint,
    /// The iterate when the run stopped.
    pub final_center: EvaluatedPoint,
    pub config: SolverConfig,
    pub mode: SolverMode,
    pub evaluations: Vec<EvaluationLog>,
}

impl RunHistory {
    pub fn evals_used(&self) -> usize {
        self.evaluations.len()
    }

    /// Lowest value among the first `evals` evaluations.
    pub fn best_after(&self, evals: usize) -> Option<f64> {
        self.evaluations
            .iter()
            .take(evals)
            .map(|e| e.value)
            .reduce(f64::min)
    }

    /// Number of evaluations spent before the best value first dropped to
    /// `threshold` or below.
    pub fn evals_to_reach(&self, threshold: f64) -> Option<usize> {
        self.evaluations
            .iter()
            .position(|e| e.value <= threshold)
            .map(|i| i + 1)
    }

    /// Sum over evaluations of the per-class sample sizes.
    pub fn total_samples(&self) -> usize {
        self.evaluations.iter().map(|e| e.n_pos + e.n_neg).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.rho,
                r.delta_before,
                r.f_candidate,
                r.f_best,
                u8::from(r.accepted),
                r.m_size,
                r.sample_size_pos,
                r.sample_size_neg
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Per-class subsample size for iteration `k`:
/// `min{N, max{k⌊50N/(N₊+N₋)⌋ + ⌊1000N/(N₊+N₋)⌋, ⌊N/10⌋}}`, with `N` the
/// size of the class being sampled. Evaluated in exact integer arithmetic.
pub fn sample_schedule(k: usize, n: usize, n_pos: usize, n_neg: usize) -> Result<usize> {
    if n == 0 || n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidConfig(format!(
            "sample schedule needs positive sizes, got N={n} N+={n_pos} N-={n_neg}"
        )));
    }
    let total = n_pos as u128 + n_neg as u128;
    let n128 = n as u128;
    let slope = 50 * n128 / total;
    let base = 1000 * n128 / total;
    let growing = (k as u128).saturating_mul(slope).saturating_add(base);
    let floor = n128 / 10;
    Ok(growing.max(floor).min(n128) as usize)
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    value: f64,
    n_pos: usize,
    n_neg: usize,
}

trait Oracle {
    fn dim(&self) -> usize;
    fn sample(&mut self, w: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Result<Sample>;
}

struct Exact<'a, O: ?Sized>(&'a mut O);

impl<O: Objective + ?Sized> Oracle for Exact<'_, O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample(&mut self, w: &[f64], _k: usize, _rng: &mut ChaCha8Rng) -> Result<Sample> {
        Ok(Sample {
            value: self.0.evaluate(w)?,
            n_pos: 0,
            n_neg: 0,
        })
    }
}

struct Subsampled<'a, O: ?Sized>(&'a mut O);

impl<O: SubsampledObjective + ?Sized> Oracle for Subsampled<'_, O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample(&mut self, w: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Result<Sample> {
        let (np, nn) = self.0.class_sizes();
        let n_pos = sample_schedule(k, np, np, nn)?;
        let n_neg = sample_schedule(k, nn, np, nn)?;
        Ok(Sample {
            value: self.0.evaluate_sampled(w, n_pos, n_neg, rng)?,
            n_pos,
            n_neg,
        })
    }
}

/// Radius and acceptance decision for a reduction ratio `rho` with `m`
/// interpolation points in dimension `dim`.
pub fn radius_update(
    rho: f64,
    m: usize,
    dim: usize,
    delta: f64,
    config: &SolverConfig,
) -> (bool, f64) {
    if rho >= config.eta1 {
        (true, config.gamma2 * delta)
    } else if rho >= config.eta0 {
        (true, delta)
    } else if m > dim + 1 {
        (false, config.gamma1 * delta)
    } else {
        (false, delta)
    }
}

/// A resumable solver run.
#[derive(Debug, Clone)]
pub struct Solver {
    config: SolverConfig,
    mode: SolverMode,
    state: TrustRegionState,
    set: InterpolationSet,
    rng: ChaCha8Rng,
    records: Vec<IterationRecord>,
    evaluations: Vec<EvaluationLog>,
    best: EvaluatedPoint,
}

impl Solver {
    /// Evaluates `w0` and `d+1` points drawn uniformly from `B(w0, Δ0)` and
    /// centers the trust region on the best of them (ties go to `w0`).
    pub fn initialize<O: Objective + ?Sized>(
        objective: &mut O,
        w0: &[f64],
        config: &SolverConfig,
    ) -> Result<Self> {
        Self::init_with(&mut Exact(objective), w0, config, SolverMode::Deterministic)
    }

    pub fn initialize_stochastic<O: SubsampledObjective + ?Sized>(
        objective: &mut O,
        w0: &[f64],
        config: &SolverConfig,
    ) -> Result<Self> {
        Self::init_with(
            &mut Subsampled(objective),
            w0,
            config,
            SolverMode::Stochastic,
        )
    }

    fn init_with<R: Oracle>(
        oracle: &mut R,
        w0: &[f64],
        config: &SolverConfig,
        mode: SolverMode,
    ) -> Result<Self> {
        config.validate()?;
        let d = oracle.dim();
        if w0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w0.len(),
            });
        }
        let w0 = Point::new(w0.to_vec())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut set = InterpolationSet::new(d);
        let mut evaluations = Vec::new();

        let mut candidates = vec![w0.clone()];
        for _ in 0..=d {
            candidates.push(uniform_in_ball(&w0, config.delta0, &mut rng));
        }
        let mut center: Option<EvaluatedPoint> = None;
        for p in candidates {
            if evaluations.len() >= config.max_evals {
                break;
            }
            let s = oracle.sample(&p, 0, &mut rng)?;
            evaluations.push(EvaluationLog {
                value: s.value,
                n_pos: s.n_pos,
                n_neg: s.n_neg,
                resample: false,
            });
            let ep = EvaluatedPoint::new(p, s.value)?;
            if center.as_ref().is_none_or(|c| ep.value < c.value) {
                center = Some(ep.clone());
            }
            set.insert(ep)?;
        }
        let center = center.expect("max_evals >= 1 guarantees one evaluation");
        let state = TrustRegionState {
            best_value: center.value,
            center: center.clone(),
            radius: config.delta0,
            iteration: 0,
            evals_used: evaluations.len(),
        };
        Ok(Solver {
            config: config.clone(),
            mode,
            state,
            set,
            rng,
            records: Vec::new(),
            evaluations,
            best: center,
        })
    }

    pub fn state(&self) -> &TrustRegionState {
        &self.state
    }

    pub fn set(&self) -> &InterpolationSet {
        &self.set
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn is_finished(&self) -> bool {
        self.state.evals_used >= self.config.max_evals || self.state.radius < self.config.delta_min
    }

    pub fn step<O: Objective + ?Sized>(&mut self, objective: &mut O) -> Result<IterationRecord> {
        assert_eq!(
            self.mode,
            SolverMode::Deterministic,
            "solver was initialized in stochastic mode"
        );
        self.step_with(&mut Exact(objective))
    }

    pub fn step_stochastic<O: SubsampledObjective + ?Sized>(
        &mut self,
        objective: &mut O,
    ) -> Result<IterationRecord> {
        assert_eq!(
            self.mode,
            SolverMode::Stochastic,
            "solver was initialized in deterministic mode"
        );
        self.step_with(&mut Subsampled(objective))
    }

    fn step_with<R: Oracle>(&mut self, oracle: &mut R) -> Result<IterationRecord> {
        if self.state.evals_used >= self.config.max_evals {
            return Err(Error::InvalidConfig("evaluation budget exhausted".into()));
        }
        let d = self.set.dim();
        let cap = self.set.capacity();
        let k = self.state.iteration + 1;
        let delta = self.state.radius;
        let center = self.state.center.clone();

        self.discard_far_points(&center.point, delta);
        let m = self.set.len();

        // Model step, or a random boundary step when no model can be built or
        // the model offers no descent.
        let mut degenerate = false;
        let mut predicted = 0.0;
        let mut step: Option<DVector<f64>> = None;
        match build_model(self.set.members(), &center.point, center.value) {
            Ok(model) => {
                let tr = solve_trust_region(&model.gradient, &model.hessian, delta)?;
                if tr.step.norm() > 1e-14 * center.point.norm_inf().max(1.0) {
                    predicted = tr.predicted_reduction;
                    step = Some(tr.step);
                }
            }
            Err(Error::EmptySet | Error::DegenerateGeometry) => degenerate = true,
            Err(e) => return Err(e),
        }
        let step = match step {
            Some(s) => s,
            None => random_direction(d, &mut self.rng) * delta,
        };
        let candidate = Point::new(
            center
                .point
                .iter()
                .zip(step.iter())
                .map(|(c, s)| c + s)
                .collect(),
        )?;

        let sample = oracle.sample(&candidate, k, &mut self.rng)?;
        self.log_eval(sample, false);
        let cand = EvaluatedPoint::new(candidate, sample.value)?;
        if cand.value < self.best.value {
            self.best = cand.clone();
        }

        let rho = if predicted <= 1e-14 * center.value.abs().max(1.0) {
            f64::NEG_INFINITY
        } else {
            (center.value - cand.value) / predicted
        };

        // Interpolation-set update.
        if m < cap {
            self.set.insert(cand.clone())?;
        } else if let Some((far, far_dist)) = self.set.farthest_from(&center.point) {
            let closer = cand.point.distance(&center.point) < far_dist;
            if rho >= self.config.eta0 || closer || degenerate {
                self.set.replace(far, cand.clone())?;
            }
        }

        let (accepted, new_delta) = if degenerate {
            (false, self.config.gamma1 * delta)
        } else {
            radius_update(rho, m, d, delta, &self.config)
        };
        if accepted {
            self.state.center = cand.clone();
        } else if self.mode == SolverMode::Stochastic
            && self.state.evals_used < self.config.max_evals
        {
            let fresh = oracle.sample(&center.point, k, &mut self.rng)?;
            self.log_eval(fresh, true);
            self.state.center.average_with(fresh.value);
            if let Some(i) = self.set.position(&center.point) {
                if let Some(member) = self.set.get_mut(i) {
                    *member = self.state.center.clone();
                }
            }
        }
        self.state.radius = new_delta;
        self.state.iteration = k;
        self.state.best_value = self.best.value;

        let record = IterationRecord {
            iteration: k,
            candidate: cand.point,
            f_candidate: cand.value,
            rho,
            delta_before: delta,
            delta_after: new_delta,
            accepted,
            m_size: m,
            sample_size_pos: sample.n_pos,
            sample_size_neg: sample.n_neg,
            f_best: self.best.value,
            evals_used: self.state.evals_used,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    fn log_eval(&mut self, s: Sample, resample: bool) {
        self.evaluations.push(EvaluationLog {
            value: s.value,
            n_pos: s.n_pos,
            n_neg: s.n_neg,
            resample,
        });
        self.state.evals_used = self.evaluations.len();
    }

    /// Drops members with `‖w − center‖ ≥ θΔ`, never the center itself. If
    /// fewer than two points would survive, keeps the center and its `d`
    /// nearest neighbours instead.
    fn discard_far_points(&mut self, center: &Point, delta: f64) {
        let limit = self.config.theta * delta;
        let dists: Vec<f64> = self
            .set
            .members()
            .iter()
            .map(|m| m.point.distance(center))
            .collect();
        let is_center: Vec<bool> = self
            .set
            .members()
            .iter()
            .map(|m| m.point.coincides_with(center))
            .collect();
        let mut keep: Vec<bool> = dists
            .iter()
            .zip(&is_center)
            .map(|(&dist, &c)| c || dist < limit)
            .collect();
        if keep.iter().filter(|&&k| k).count() < 2 {
            let mut order: Vec<usize> = (0..dists.len()).filter(|&i| !is_center[i]).collect();
            order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
            keep = is_center.clone();
            for &i in order.iter().take(self.set.dim()) {
                keep[i] = true;
            }
        }
        self.set.retain_indices(&keep);
    }

    pub fn into_history(self) -> RunHistory {
        RunHistory {
            records: self.records,
            best: self.best,
            final_center: self.state.center,
            config: self.config,
            mode: self.mode,
            evaluations: self.evaluations,
        }
    }
}

fn random_direction(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn uniform_in_ball(center: &Point, radius: f64, rng: &mut ChaCha8Rng) -> Point {
    let d = center.dim();
    let dir = random_direction(d, rng);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    Point::new(
        center
            .iter()
            .zip(dir.iter())
            .map(|(c, u)| c + r * u)
            .collect(),
    )
    .expect("finite center and radius give finite points")
}

/// Runs the deterministic loop until the budget is spent or the radius
/// falls below `delta_min`.
pub fn minimize<O: Objective + ?Sized>(
    objective: &mut O,
    w0: &[f64],
    config: &SolverConfig,
) -> Result<RunHistory> {
    let mut solver = Solver::initialize(objective, w0, config)?;
    while !solver.is_finished() {
        solver.step(objective)?;
    }
    Ok(solver.into_history())
}

/// Runs the subsampled loop; see the module documentation.
pub fn minimize_stochastic<O: SubsampledObjective + ?Sized>(
    objective: &mut O,
    w0: &[f64],
    config: &SolverConfig,
) -> Result<RunHistory> {
    let mut solver = Solver::initialize_stochastic(objective, w0, config)?;
    while !solver.is_finished() {
        solver.step_stochastic(objective)?;
    }
    Ok(solver.into_history())
}
