//! Independent reference implementations and instance generators shared by
//! the property suites.
#![allow(dead_code)]

use dfotr::data::LabeledDataset;
use dfotr::objectives::GaussianPairSpec;
use dfotr::trsub::TrustRegionStep;
use dfotr::{EvaluatedPoint, Point};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_vector<R: Rng>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| normal(rng))
}

pub fn random_symmetric<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    (&a + a.transpose()) * 0.5
}

pub fn random_orthogonal<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    a.qr().q()
}

// ---------------------------------------------------------------- AUC

/// Pair count by definition: ties contribute nothing.
pub fn brute_force_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0u64;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1;
            }
        }
    }
    wins as f64 / (pos.len() as f64 * neg.len() as f64)
}

/// Scores drawn from a small integer range so that ties are common.
pub fn random_scores<R: Rng>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let n_pos = rng.random_range(1..60);
    let n_neg = rng.random_range(1..60);
    let span = rng.random_range(1..20);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    rng.random_range(0..span) as f64 * 0.5
                } else {
                    normal(rng) * span as f64
                }
            })
            .collect()
    };
    (draw(n_pos), draw(n_neg))
}

// ---------------------------------------------------------------- trust region

#[derive(Debug, Clone)]
pub struct TrInstance {
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub delta: f64,
}

impl TrInstance {
    pub fn model(&self, s: &DVector<f64>) -> f64 {
        self.g.dot(s) + 0.5 * s.dot(&(&self.h * s))
    }
}

pub fn random_tr_instance<R: Rng>(d: usize, rng: &mut R) -> TrInstance {
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let mut h = random_symmetric(d, rng) * scale;
    if rng.random_bool(0.25) {
        // Positive definite, often with an interior solution.
        h = &h * h.transpose() + DMatrix::identity(d, d) * 0.1 * scale;
    }
    let g = random_vector(d, rng) * 10f64.powf(rng.random_range(-2.0..2.0));
    let delta = 10f64.powf(rng.random_range(-2.0..1.0));
    TrInstance { g, h, delta }
}

/// `H` with a negative leftmost eigenvalue and `g` orthogonal to its
/// eigenvector, with the radius past `‖(H − λ₁I)⁺g‖` so the hard case applies.
pub fn random_hard_case<R: Rng>(d: usize, rng: &mut R) -> TrInstance {
    let q = random_orthogonal(d, rng);
    let lambda1 = -rng.random_range(0.1..3.0);
    let mut eigs = vec![lambda1];
    eigs.extend((1..d).map(|_| lambda1 + rng.random_range(0.5..4.0)));
    let h = &q * DMatrix::from_diagonal(&DVector::from_vec(eigs.clone())) * q.transpose();
    let mut coeffs = DVector::from_fn(d, |_, _| normal(rng));
    coeffs[0] = 0.0;
    let g = &q * &coeffs;
    let p_norm = (1..d)
        .map(|i| (coeffs[i] / (eigs[i] - lambda1)).powi(2))
        .sum::<f64>()
        .sqrt();
    let delta = p_norm * rng.random_range(1.05..3.0) + 1e-3;
    TrInstance {
        g,
        h: (&h + h.transpose()) * 0.5,
        delta,
    }
}

/// Largest violation among the optimality conditions
/// `(H + λI)s = −g`, `‖s‖ ≤ Δ`, `λ ≥ 0`, `λ(Δ − ‖s‖) = 0`, `H + λI ⪰ 0`,
/// each scaled by the natural magnitude of its terms.
pub fn kkt_residual(inst: &TrInstance, sol: &TrustRegionStep) -> f64 {
    let d = inst.g.len();
    let s = &sol.step;
    let lam = sol.multiplier;
    let shifted = &inst.h + DMatrix::identity(d, d) * lam;
    let scale = 1.0 + inst.g.norm() + (inst.h.norm() + lam) * inst.delta;
    let stationarity = (&shifted * s + &inst.g).norm() / scale;
    let feasibility = (s.norm() - inst.delta).max(0.0) / inst.delta;
    let dual = (-lam).max(0.0);
    let complementarity = lam * (inst.delta - s.norm()).abs() / scale;
    let curvature = (-shifted.symmetric_eigenvalues().min()).max(0.0) / (1.0 + inst.h.norm());
    let reduction = (sol.predicted_reduction + inst.model(s)).abs() / scale;
    stationarity
        .max(feasibility)
        .max(dual)
        .max(complementarity)
        .max(curvature)
        .max(reduction)
}

/// Minimum of the model over a Cartesian grid of the ball together with the
/// radial projections of the grid onto the sphere (`d ≤ 3`).
pub fn grid_minimum(inst: &TrInstance) -> f64 {
    let d = inst.g.len();
    let per_axis: usize = match d {
        1 => 4001,
        2 => 301,
        3 => 61,
        _ => panic!("grid oracle only for d <= 3"),
    };
    let mut best = 0.0f64;
    let mut idx = vec![0usize; d];
    let mut s = DVector::zeros(d);
    loop {
        for k in 0..d {
            s[k] = inst.delta * (2.0 * idx[k] as f64 / (per_axis - 1) as f64 - 1.0);
        }
        let n = s.norm();
        if n > 0.0 {
            let edge = &s * (inst.delta / n);
            best = best.min(inst.model(&edge));
            if n <= inst.delta {
                best = best.min(inst.model(&s));
            }
        }
        let mut k = 0;
        loop {
            if k == d {
                return best;
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------- models

/// Number of coefficients of a full quadratic in `d` variables.
pub fn quadratic_terms(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

pub struct Quadratic {
    pub c: f64,
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
}

impl Quadratic {
    pub fn random<R: Rng>(d: usize, rng: &mut R) -> Self {
        Quadratic {
            c: normal(rng),
            g: random_vector(d, rng),
            h: random_symmetric(d, rng),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        self.c + self.g.dot(&x) + 0.5 * x.dot(&(&self.h * &x))
    }
}

/// Uniform points in the unit ball around `center`.
pub fn points_around<R: Rng>(center: &[f64], m: usize, radius: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let d = center.len();
    (0..m)
        .map(|_| {
            let dir = random_vector(d, rng).normalize();
            let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
            center
                .iter()
                .zip(dir.iter())
                .map(|(c, u)| c + r * u)
                .collect()
        })
        .collect()
}

pub fn evaluated(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Vec<EvaluatedPoint> {
    points
        .iter()
        .map(|p| EvaluatedPoint::new(Point::new(p.clone()).unwrap(), f(p)).unwrap())
        .collect()
}

// ---------------------------------------------------------------- hinge

/// Smallest distance of any pair margin `s+ − s-` from the kink at 1.
pub fn distance_to_kink(w: &[f64], data: &LabeledDataset) -> f64 {
    let (p, n) = data.scores(w).unwrap();
    let mut best = f64::INFINITY;
    for a in &p {
        for b in &n {
            best = best.min((a - b - 1.0).abs());
        }
    }
    best
}

pub fn random_dense_dataset<R: Rng>(
    d: usize,
    n_pos: usize,
    n_neg: usize,
    rng: &mut R,
) -> LabeledDataset {
    let shift: Vec<f64> = (0..d).map(|_| normal(rng) * 0.5).collect();
    let pos: Vec<Vec<f64>> = (0..n_pos)
        .map(|_| (0..d).map(|k| normal(rng) + shift[k]).collect())
        .collect();
    let neg: Vec<Vec<f64>> = (0..n_neg)
        .map(|_| (0..d).map(|_| normal(rng)).collect())
        .collect();
    LabeledDataset::from_dense(&pos, &neg).unwrap()
}

// ---------------------------------------------------------------- Gaussian AUC

/// A random pair spec with correlated classes and a separation that keeps
/// the expected AUC away from the extremes.
pub fn random_gaussian_spec<R: Rng>(d: usize, rng: &mut R) -> GaussianPairSpec {
    let a = DMatrix::from_fn(2 * d, 2 * d, |_, _| normal(rng) / (2.0 * d as f64).sqrt());
    let joint = &a * a.transpose() + DMatrix::identity(2 * d, 2 * d) * 0.2;
    let mu_pos = random_vector(d, rng) * 0.5;
    let mu_neg = random_vector(d, rng) * 0.5;
    GaussianPairSpec::new(
        mu_pos,
        mu_neg,
        joint.view((0, 0), (d, d)).into_owned(),
        joint.view((d, d), (d, d)).into_owned(),
        joint.view((0, d), (d, d)).into_owned(),
    )
    .unwrap()
}

/// The same marginals with independent classes, as produced by sampling a
/// labeled dataset one class at a time.
pub fn without_cross_covariance(spec: &GaussianPairSpec) -> GaussianPairSpec {
    GaussianPairSpec::independent(
        spec.mu_pos.clone(),
        spec.mu_neg.clone(),
        spec.sigma_pos.clone(),
        spec.sigma_neg.clone(),
    )
    .unwrap()
}

/// Fraction of jointly drawn pairs ranked correctly by `w`.
pub fn monte_carlo_auc<R: Rng>(
    w: &[f64],
    spec: &GaussianPairSpec,
    draws: usize,
    rng: &mut R,
) -> f64 {
    let sampler = spec.pair_sampler();
    let mut wins = 0usize;
    for _ in 0..draws {
        let (p, n) = sampler.draw(rng);
        let sp: f64 = p.iter().zip(w).map(|(x, w)| x * w).sum();
        let sn: f64 = n.iter().zip(w).map(|(x, w)| x * w).sum();
        if sp > sn {
            wins += 1;
        }
    }
    wins as f64 / draws as f64
}
