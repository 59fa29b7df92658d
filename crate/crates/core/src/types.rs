use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A finite point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &Point) -> f64 {
        distance(&self.0, &other.0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Duplicate test used for interpolation-set membership:
    /// `‖p − q‖∞ ≤ 1e−12 · max(1, ‖p‖∞)`.
    pub fn coincides_with(&self, other: &Point) -> bool {
        let tol = 1e-12 * self.norm_inf().max(1.0);
        self.0
            .iter()
            .zip(&other.0)
            .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A point together with its (possibly averaged) objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedPoint {
    pub point: Point,
    pub value: f64,
    /// Number of evaluations averaged into `value`.
    pub eval_count: u32,
}

impl EvaluatedPoint {
    pub fn new(point: Point, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite("objective value"));
        }
        Ok(EvaluatedPoint {
            point,
            value,
            eval_count: 1,
        })
    }

    /// Folds a fresh evaluation into the stored value as `(value + fresh) / 2`.
    pub fn average_with(&mut self, fresh: f64) {
        self.value = (self.value + fresh) / 2.0;
        self.eval_count += 1;
    }
}

/// Bounded set of evaluated points feeding model construction.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSet {
    members: Vec<EvaluatedPoint>,
    dim: usize,
}

impl InterpolationSet {
    pub fn new(dim: usize) -> Self {
        InterpolationSet {
            members: Vec::with_capacity(Self::capacity_for(dim)),
            dim,
        }
    }

    /// Number of coefficients of a full quadratic in `dim` variables.
    pub fn capacity_for(dim: usize) -> usize {
        (dim + 1) * (dim + 2) / 2
    }

    pub fn capacity(&self) -> usize {
        Self::capacity_for(self.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.capacity()
    }

    pub fn members(&self) -> &[EvaluatedPoint] {
        &self.members
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.members.iter().any(|m| m.point.coincides_with(p))
    }

    pub fn position(&self, p: &Point) -> Option<usize> {
        self.members.iter().position(|m| m.point.coincides_with(p))
    }

    /// Adds a point; returns `false` (leaving the set untouched) when the set
    /// is full or the point duplicates a member.
    pub fn insert(&mut self, ep: EvaluatedPoint) -> Result<bool> {
        self.check_dim(&ep.point)?;
        if self.is_full() || self.contains(&ep.point) {
            return Ok(false);
        }
        self.members.push(ep);
        Ok(true)
    }

    /// Replaces the member at `index`; returns `false` when `ep` duplicates
    /// some other member.
    pub fn replace(&mut self, index: usize, ep: EvaluatedPoint) -> Result<bool> {
        self.check_dim(&ep.point)?;
        let dup = self
            .members
            .iter()
            .enumerate()
            .any(|(i, m)| i != index && m.point.coincides_with(&ep.point));
        if dup {
            return Ok(false);
        }
        self.members[index] = ep;
        Ok(true)
    }

    /// Index and distance of the member farthest from `center`.
    pub fn farthest_from(&self, center: &Point) -> Option<(usize, f64)> {
        self.members
            .iter()
            .enumerate()
            .map(|(i, m)| (i, m.point.distance(center)))
            .fold(None, |best, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            })
    }

    pub fn get_mut(&mut self, index: usize) -> Option<&mut EvaluatedPoint> {
        self.members.get_mut(index)
    }

    pub(crate) fn retain_indices(&mut self, keep: &[bool]) {
        let mut it = keep.iter();
        self.members.retain(|_| *it.next().unwrap_or(&true));
    }

    fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        Ok(())
    }
}

/// Parameters of the trust-region loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Acceptance threshold on the reduction ratio.
    pub eta0: f64,
    /// Expansion threshold on the reduction ratio.
    pub eta1: f64,
    /// Points farther than `theta * delta` from the center are discarded.
    pub theta: f64,
    /// Shrink factor.
    pub gamma1: f64,
    /// Expansion factor.
    pub gamma2: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub max_evals: usize,
    pub seed: u64,
}

impl SolverConfig {
    /// Default parameters for a `dim`-dimensional problem: a budget of
    /// `100 * dim` evaluations and a radius floor of `1e-10`.
    pub fn defaults(dim: usize) -> Self {
        SolverConfig {
            eta0: 0.001,
            eta1: 0.75,
            theta: 10.0,
            gamma1: 0.98,
            gamma2: 1.5,
            delta0: 1.0,
            delta_min: 1e-10,
            max_evals: 100 * dim.max(1),
            seed: 0,
        }
    }

    pub fn with_budget(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let all = [
            self.eta0,
            self.eta1,
            self.theta,
            self.gamma1,
            self.gamma2,
            self.delta0,
            self.delta_min,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if !(0.0 < self.eta0 && self.eta0 < self.eta1 && self.eta1 < 1.0) {
            return bad(format!(
                "need 0 < eta0 < eta1 < 1, got eta0={} eta1={}",
                self.eta0, self.eta1
            ));
        }
        if !(0.0 < self.gamma1 && self.gamma1 < 1.0 && 1.0 < self.gamma2) {
            return bad(format!(
                "need 0 < gamma1 < 1 < gamma2, got gamma1={} gamma2={}",
                self.gamma1, self.gamma2
            ));
        }
        if self.theta <= 1.0 {
            return bad(format!("need theta > 1, got {}", self.theta));
        }
        if self.delta0 <= 0.0 {
            return bad(format!("need delta0 > 0, got {}", self.delta0));
        }
        if self.delta_min < 0.0 {
            return bad(format!("need delta_min >= 0, got {}", self.delta_min));
        }
        if self.max_evals == 0 {
            return bad("max_evals must be positive".into());
        }
        Ok(())
    }
}

/// Current iterate, radius and bookkeeping of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionState {
    pub center: EvaluatedPoint,
    pub radius: f64,
    pub best_value: f64,
    pub iteration: usize,
    pub evals_used: usize,
}

/// A black-box function to be minimized.
pub trait Objective {
    fn dim(&self) -> usize;

    fn evaluate(&mut self, w: &[f64]) -> Result<f64>;
}

/// An objective that can also be estimated on per-class subsamples of its data.
pub trait SubsampledObjective: Objective {
    /// `(N+, N-)`, the full class sizes.
    fn class_sizes(&self) -> (usize, usize);

    fn evaluate_sampled(
        &mut self,
        w: &[f64],
        n_pos: usize,
        n_neg: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64>;
}

impl<O: Objective + ?Sized> Objective for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<f64> {
        (**self).evaluate(w)
    }
}

impl<O: SubsampledObjective + ?Sized> SubsampledObjective for &mut O {
    fn class_sizes(&self) -> (usize, usize) {
        (**self).class_sizes()
    }

    fn evaluate_sampled(
        &mut self,
        w: &[f64],
        n_pos: usize,
        n_neg: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        (**self).evaluate_sampled(w, n_pos, n_neg, rng)
    }
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<f64> {
        Ok((self.f)(w))
    }
}
