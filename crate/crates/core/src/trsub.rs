//! Global minimization of a quadratic over a Euclidean ball.
//!
//! Solves `min gᵀs + ½ sᵀHs` subject to `‖s‖ ≤ Δ` for symmetric, possibly
//! indefinite `H`. The solution satisfies `(H + λI)s = −g` with `H + λI ⪰ 0`,
//! `λ ≥ 0` and `λ(Δ − ‖s‖) = 0`. Working in the eigenbasis of `H` turns the
//! search for `λ` into a scalar root-finding problem on the secular equation
//! `1/Δ − 1/‖s(λ)‖ = 0`, and makes the hard case (gradient orthogonal to the
//! leftmost eigenspace) an explicit branch.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Solution of the trust-region subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionStep {
    pub step: DVector<f64>,
    /// `−(gᵀs + ½ sᵀHs)`, never negative.
    pub predicted_reduction: f64,
    /// The multiplier `λ` certifying optimality.
    pub multiplier: f64,
    pub hard_case: bool,
}

const MAX_ROOT_ITERS: usize = 500;

pub fn solve_trust_region(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    delta: f64,
) -> Result<TrustRegionStep> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidRadius(delta));
    }
    let d = g.len();
    if h.nrows() != d || h.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.nrows(),
        });
    }
    if g.iter().chain(h.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trust-region subproblem input"));
    }
    if d == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }

    let hs = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(hs.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });
    let evals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let evecs = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut coef: Vec<f64> = (evecs.transpose() * g).iter().copied().collect();

    let g_norm = g.norm();
    let eig_scale = evals.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let eig_tol = 1e-12 * eig_scale;
    let coef_tol = 1e-12 * g_norm;
    let lam_min = evals[0];
    let lo = (-lam_min).max(0.0);

    // Components whose shifted eigenvalue vanishes at `lo`.
    let singular: Vec<bool> = evals.iter().map(|e| e + lo <= eig_tol).collect();
    let blocked = singular
        .iter()
        .zip(&coef)
        .any(|(&s, a)| s && a.abs() > coef_tol);
    for (s, a) in singular.iter().zip(coef.iter_mut()) {
        if *s && a.abs() <= coef_tol {
            *a = 0.0;
        }
    }

    let step_at = |lambda: f64| -> Vec<f64> {
        evals
            .iter()
            .zip(&coef)
            .map(|(e, a)| if *a == 0.0 { 0.0 } else { -a / (e + lambda) })
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    let (mut s_eig, multiplier, hard_case) = 'solve: {
        if !blocked {
            let s_lo = step_at(lo);
            let n_lo = norm(&s_lo);
            if n_lo <= delta {
                if lo == 0.0 {
                    break 'solve (s_lo, 0.0, false);
                }
                // Hard case: move along the leftmost eigenvector to the boundary.
                let tau = (delta * delta - n_lo * n_lo).max(0.0).sqrt();
                let mut s = s_lo;
                s[0] += tau;
                break 'solve (s, lo, true);
            }
        }
        let lambda = secular_root(&evals, &coef, delta, lo);
        (step_at(lambda), lambda, false)
    };

    let n = norm(&s_eig);
    if n > delta {
        let f = delta / n;
        s_eig.iter_mut().for_each(|x| *x *= f);
    }

    let mut leading = evecs.column(0).into_owned();
    if hard_case {
        if let Some(first) = leading.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                leading.neg_mut();
            }
        }
    }
    let mut step = DVector::zeros(d);
    for (k, sk) in s_eig.iter().enumerate() {
        if k == 0 {
            step.axpy(*sk, &leading, 1.0);
        } else {
            step.axpy(*sk, &evecs.column(k), 1.0);
        }
    }
    let model = g.dot(&step) + 0.5 * step.dot(&(&hs * &step));
    Ok(TrustRegionStep {
        step,
        predicted_reduction: (-model).max(0.0),
        multiplier,
        hard_case,
    })
}

/// Finds `λ > lo` with `‖s(λ)‖ = Δ` by safeguarded Newton on
/// `φ(λ) = 1/Δ − 1/‖s(λ)‖`, which is increasing and concave.
fn secular_root(evals: &[f64], coef: &[f64], delta: f64, lo: f64) -> f64 {
    let a_norm = coef.iter().map(|a| a * a).sum::<f64>().sqrt();
    let eval = |lambda: f64| -> (f64, f64) {
        let mut sq = 0.0;
        let mut cube = 0.0;
        for (e, a) in evals.iter().zip(coef) {
            if *a == 0.0 {
                continue;
            }
            let t = e + lambda;
            sq += a * a / (t * t);
            cube += a * a / (t * t * t);
        }
        let n = sq.sqrt();
        (n, cube / (n * n * n))
    };

    let mut left = lo;
    let mut right = lo + a_norm / delta;
    // ‖s(right)‖ ≤ Δ by construction; widen if rounding says otherwise.
    while eval(right).0 > delta {
        right = lo + 2.0 * (right - lo).max(f64::MIN_POSITIVE);
    }
    let mut lambda = right;
    for _ in 0..MAX_ROOT_ITERS {
        let (n, dphi) = eval(lambda);
        if !n.is_finite() || n > delta {
            left = lambda;
        } else {
            right = lambda;
        }
        if n.is_finite() && (n - delta).abs() <= 1e-14 * delta {
            return lambda;
        }
        let mut next = f64::NAN;
        if n.is_finite() && n > 0.0 && dphi.is_finite() && dphi > 0.0 {
            let phi = 1.0 / delta - 1.0 / n;
            next = lambda - phi / dphi;
        }
        if !(next > left && next < right) {
            next = 0.5 * (left + right);
        }
        if next == lambda || right - left <= 4.0 * f64::EPSILON * right.abs().max(1e-300) {
            break;
        }
        lambda = next;
    }
    // Prefer the feasible end of the bracket.
    right
}
