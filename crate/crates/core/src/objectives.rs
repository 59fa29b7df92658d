//! Objectives: empirical and expected AUC of a linear scorer, the pairwise
//! hinge surrogate, and classic nonconvex benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::data::{sample_class_indices, LabeledDataset, SparseVector};
use crate::{Error, Objective, Result, SubsampledObjective};

/// Fraction of (positive, negative) pairs with `p > n`; ties count as
/// misordered.
pub fn auc_from_scores(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() {
        return Err(Error::EmptyClass("positive"));
    }
    if neg.is_empty() {
        return Err(Error::EmptyClass("negative"));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score"));
    }
    let mut p = pos.to_vec();
    let mut n = neg.to_vec();
    p.sort_by(f64::total_cmp);
    n.sort_by(f64::total_cmp);
    // For each negative (ascending), count positives strictly above it.
    let mut at_or_below = 0usize;
    let mut correct: u64 = 0;
    for s in &n {
        while at_or_below < p.len() && p[at_or_below] <= *s {
            at_or_below += 1;
        }
        correct += (p.len() - at_or_below) as u64;
    }
    Ok(correct as f64 / (p.len() as f64 * n.len() as f64))
}

pub fn auc(w: &[f64], data: &LabeledDataset) -> Result<f64> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    let (p, n) = data.scores(w)?;
    auc_from_scores(&p, &n)
}

/// Empirical AUC of `w` on a fixed dataset.
#[derive(Debug, Clone)]
pub struct AucObjective {
    data: Arc<LabeledDataset>,
}

impl AucObjective {
    pub fn new(data: Arc<LabeledDataset>) -> Result<Self> {
        if data.n_pos() == 0 {
            return Err(Error::EmptyClass("positive"));
        }
        if data.n_neg() == 0 {
            return Err(Error::EmptyClass("negative"));
        }
        Ok(AucObjective { data })
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }
}

impl Objective for AucObjective {
    fn dim(&self) -> usize {
        self.data.dim
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<f64> {
        auc(w, &self.data)
    }
}

impl SubsampledObjective for AucObjective {
    fn class_sizes(&self) -> (usize, usize) {
        (self.data.n_pos(), self.data.n_neg())
    }

    fn evaluate_sampled(
        &mut self,
        w: &[f64],
        n_pos: usize,
        n_neg: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        self.data.check_weights(w)?;
        let (pi, ni) = sample_class_indices(&self.data, n_pos, n_neg, rng)?;
        let p: Vec<f64> = pi.iter().map(|&i| self.data.positives[i].dot(w)).collect();
        let n: Vec<f64> = ni.iter().map(|&i| self.data.negatives[i].dot(w)).collect();
        auc_from_scores(&p, &n)
    }
}

/// Flips the sign of an objective so a minimizer maximizes it.
#[derive(Debug, Clone)]
pub struct Negated<O>(pub O);

impl<O: Objective> Objective for Negated<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<f64> {
        self.0.evaluate(w).map(|v| -v)
    }
}

impl<O: SubsampledObjective> SubsampledObjective for Negated<O> {
    fn class_sizes(&self) -> (usize, usize) {
        self.0.class_sizes()
    }

    fn evaluate_sampled(
        &mut self,
        w: &[f64],
        n_pos: usize,
        n_neg: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        self.0.evaluate_sampled(w, n_pos, n_neg, rng).map(|v| -v)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Jointly Gaussian positive/negative feature vectors:
/// `(X+, X-) ~ N((μ+, μ-), [[Σ++, Σ+-], [Σ+-ᵀ, Σ--]])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPairSpec {
    pub mu_pos: DVector<f64>,
    pub mu_neg: DVector<f64>,
    pub sigma_pos: DMatrix<f64>,
    pub sigma_neg: DMatrix<f64>,
    pub sigma_cross: DMatrix<f64>,
}

const PSD_TOL: f64 = 1e-10;
const DEGENERATE_VARIANCE: f64 = 1e-300;

impl GaussianPairSpec {
    pub fn new(
        mu_pos: DVector<f64>,
        mu_neg: DVector<f64>,
        sigma_pos: DMatrix<f64>,
        sigma_neg: DMatrix<f64>,
        sigma_cross: DMatrix<f64>,
    ) -> Result<Self> {
        let d = mu_pos.len();
        if d == 0 {
            return Err(Error::InvalidConfig("empty mean vector".into()));
        }
        for (found, ok) in [
            (mu_neg.len(), mu_neg.len() == d),
            (sigma_pos.nrows(), sigma_pos.shape() == (d, d)),
            (sigma_neg.nrows(), sigma_neg.shape() == (d, d)),
            (sigma_cross.nrows(), sigma_cross.shape() == (d, d)),
        ] {
            if !ok {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        let spec = GaussianPairSpec {
            mu_pos,
            mu_neg,
            sigma_pos,
            sigma_neg,
            sigma_cross,
        };
        if spec
            .mu_pos
            .iter()
            .chain(spec.mu_neg.iter())
            .chain(spec.sigma_pos.iter())
            .chain(spec.sigma_neg.iter())
            .chain(spec.sigma_cross.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("Gaussian parameters"));
        }
        let joint = spec.joint_covariance();
        let scale = joint.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if (&joint - joint.transpose()).amax() > PSD_TOL * scale {
            return Err(Error::InvalidConfig("covariance is not symmetric".into()));
        }
        let min_eig = joint.symmetric_eigenvalues().min();
        if min_eig < -PSD_TOL * scale {
            return Err(Error::InvalidConfig(format!(
                "joint covariance is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(spec)
    }

    /// Independent classes with the given means and covariances.
    pub fn independent(
        mu_pos: DVector<f64>,
        mu_neg: DVector<f64>,
        sigma_pos: DMatrix<f64>,
        sigma_neg: DMatrix<f64>,
    ) -> Result<Self> {
        let d = mu_pos.len();
        Self::new(mu_pos, mu_neg, sigma_pos, sigma_neg, DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.mu_pos.len()
    }

    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.sigma_pos);
        m.view_mut((d, d), (d, d)).copy_from(&self.sigma_neg);
        m.view_mut((0, d), (d, d)).copy_from(&self.sigma_cross);
        m.view_mut((d, 0), (d, d))
            .copy_from(&self.sigma_cross.transpose());
        m
    }

    /// Draws one jointly distributed `(x+, x-)` pair. Use [`Self::pair_sampler`]
    /// for many draws.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        self.pair_sampler().draw(rng)
    }

    pub fn pair_sampler(&self) -> PairSampler {
        PairSampler {
            mean: DVector::from_iterator(
                2 * self.dim(),
                self.mu_pos.iter().chain(self.mu_neg.iter()).copied(),
            ),
            root: psd_sqrt(&self.joint_covariance()),
        }
    }

    /// Draws independent class samples from the marginals.
    pub fn sample_dataset<R: Rng + ?Sized>(
        &self,
        n_pos: usize,
        n_neg: usize,
        rng: &mut R,
    ) -> LabeledDataset {
        let d = self.dim();
        let draw = |n: usize, mu: &DVector<f64>, sigma: &DMatrix<f64>, rng: &mut R| {
            let root = psd_sqrt(sigma);
            (0..n)
                .map(|_| {
                    let x = &root * standard_normal_vector(d, rng) + mu;
                    SparseVector::from_dense(x.as_slice())
                })
                .collect::<Vec<_>>()
        };
        let positives = draw(n_pos, &self.mu_pos, &self.sigma_pos, rng);
        let negatives = draw(n_neg, &self.mu_neg, &self.sigma_neg, rng);
        LabeledDataset {
            dim: d,
            positives,
            negatives,
        }
    }
}

/// Repeated `(x+, x-)` draws with the covariance square root factored once.
#[derive(Debug, Clone)]
pub struct PairSampler {
    mean: DVector<f64>,
    root: DMatrix<f64>,
}

impl PairSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let d = self.mean.len() / 2;
        let x = &self.root * standard_normal_vector(2 * d, rng) + &self.mean;
        (
            x.rows(0, d).iter().copied().collect(),
            x.rows(d, d).iter().copied().collect(),
        )
    }
}

fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Symmetric square root `V diag(√max(λ,0)) Vᵀ`.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `P(wᵀX+ > wᵀX-)` in closed form: `Φ(μ_Z / σ_Z)` with `Z = wᵀ(X+ − X-)`.
pub fn expected_auc_gaussian(w: &[f64], spec: &GaussianPairSpec) -> Result<f64> {
    let d = spec.dim();
    if w.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    let w = DVector::from_column_slice(w);
    let mu = w.dot(&(&spec.mu_pos - &spec.mu_neg));
    let var = w.dot(&(&spec.sigma_pos * &w)) + w.dot(&(&spec.sigma_neg * &w))
        - 2.0 * w.dot(&(&spec.sigma_cross * &w));
    if var <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateDirection);
    }
    Ok(normal_cdf(mu / var.sqrt()))
}

/// Closed-form expected AUC as an objective.
#[derive(Debug, Clone)]
pub struct ExpectedAuc {
    pub spec: GaussianPairSpec,
}

impl Objective for ExpectedAuc {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<f64> {
        expected_auc_gaussian(w, &self.spec)
    }
}

struct HingeTerms {
    loss: f64,
    /// Active pairs per positive example.
    pos_counts: Vec<usize>,
    /// Active pairs per negative example.
    neg_counts: Vec<usize>,
}

/// A pair `(i, j)` is active when `n_j > p_i − 1`.
fn hinge_terms(pos: &[f64], neg: &[f64]) -> HingeTerms {
    let mut shifted: Vec<f64> = pos.iter().map(|p| p - 1.0).collect();
    shifted.sort_by(f64::total_cmp);
    let mut sorted_neg = neg.to_vec();
    sorted_neg.sort_by(f64::total_cmp);
    // suffix[k] = sum of sorted_neg[k..]
    let mut suffix = vec![0.0; sorted_neg.len() + 1];
    for k in (0..sorted_neg.len()).rev() {
        suffix[k] = suffix[k + 1] + sorted_neg[k];
    }
    let mut loss = 0.0;
    let pos_counts: Vec<usize> = pos
        .iter()
        .map(|p| {
            let q = p - 1.0;
            let first = sorted_neg.partition_point(|n| *n <= q);
            let c = sorted_neg.len() - first;
            loss += c as f64 * (1.0 - p) + suffix[first];
            c
        })
        .collect();
    let neg_counts = neg
        .iter()
        .map(|n| shifted.partition_point(|q| q < n))
        .collect();
    HingeTerms {
        loss,
        pos_counts,
        neg_counts,
    }
}

/// Mean pairwise hinge loss `max(0, 1 − wᵀ(x+ − x-))` over all pairs.
pub fn pairwise_hinge_loss(w: &[f64], data: &LabeledDataset) -> Result<f64> {
    pairwise_hinge(w, data).map(|(l, _)| l)
}

pub fn pairwise_hinge_grad(w: &[f64], data: &LabeledDataset) -> Result<Vec<f64>> {
    pairwise_hinge(w, data).map(|(_, g)| g)
}

/// Loss and a subgradient in `O(N log N + nnz)`.
pub fn pairwise_hinge(w: &[f64], data: &LabeledDataset) -> Result<(f64, Vec<f64>)> {
    if data.n_pos() == 0 {
        return Err(Error::EmptyClass("positive"));
    }
    if data.n_neg() == 0 {
        return Err(Error::EmptyClass("negative"));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    let (p, n) = data.scores(w)?;
    let terms = hinge_terms(&p, &n);
    let pairs = data.n_pos() as f64 * data.n_neg() as f64;
    let mut grad = vec![0.0; data.dim];
    for (x, c) in data.negatives.iter().zip(&terms.neg_counts) {
        if *c > 0 {
            x.add_scaled_to(*c as f64 / pairs, &mut grad);
        }
    }
    for (x, c) in data.positives.iter().zip(&terms.pos_counts) {
        if *c > 0 {
            x.add_scaled_to(-(*c as f64) / pairs, &mut grad);
        }
    }
    Ok((terms.loss / pairs, grad))
}

pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let r = x2 - b * x1 * x1 + c * x1 - 6.0;
    r * r + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Six-hump camel back.
pub fn camelback(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let x1sq = x1 * x1;
    (4.0 - 2.1 * x1sq + x1sq * x1sq / 3.0) * x1sq + x1 * x2 + (-4.0 + 4.0 * x2 * x2) * x2 * x2
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

pub fn hartmann6(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..6)
                .map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2))
                .sum();
            HARTMANN_ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Branin,
    Camelback,
    Hartmann6,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [
        Benchmark::Branin,
        Benchmark::Camelback,
        Benchmark::Hartmann6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Branin => "branin",
            Benchmark::Camelback => "camelback",
            Benchmark::Hartmann6 => "hartmann6",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "branin" => Some(Benchmark::Branin),
            "camelback" | "camel" | "sixhump" => Some(Benchmark::Camelback),
            "hartmann6" | "hartmann" => Some(Benchmark::Hartmann6),
            _ => None,
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            Benchmark::Hartmann6 => 6,
            _ => 2,
        }
    }

    /// Known global minimum value.
    pub fn f_opt(self) -> f64 {
        match self {
            Benchmark::Branin => 0.397887,
            Benchmark::Camelback => -1.031628,
            Benchmark::Hartmann6 => -3.322368,
        }
    }

    /// Search box, one `(lower, upper)` per coordinate.
    pub fn domain(self) -> Vec<(f64, f64)> {
        match self {
            Benchmark::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            Benchmark::Camelback => vec![(-3.0, 3.0), (-2.0, 2.0)],
            Benchmark::Hartmann6 => vec![(0.0, 1.0); 6],
        }
    }

    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Branin => branin(x),
            Benchmark::Camelback => camelback(x),
            Benchmark::Hartmann6 => hartmann6(x),
        }
    }
}

impl Objective for Benchmark {
    fn dim(&self) -> usize {
        self.dimension()
    }

    fn evaluate(&mut self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: w.len(),
            });
        }
        Ok(self.value(w))
    }
}
