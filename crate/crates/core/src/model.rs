//! Quadratic interpolation models.
//!
//! The model `Q(w) = f + gᵀs + ½ sᵀHs`, `s = w − center`, always reproduces
//! the center value exactly. How `g` and `H` are fitted depends on how many
//! usable displacements `n` the interpolation set offers in dimension `d`:
//!
//! * `n < d`: linear model, minimum-norm least squares, `H = 0`.
//! * `d ≤ n < (d+1)(d+2)/2 − 1`: minimum-Frobenius-norm Hessian interpolation.
//! * `n = (d+1)(d+2)/2 − 1`: full quadratic interpolation in the monomial
//!   basis, falling back to the minimum-Frobenius fit without the worst-placed
//!   point when the system is numerically singular.
//!
//! Displacements are divided by their largest norm before solving.

use nalgebra::{DMatrix, DVector, SVD};

use crate::{Error, EvaluatedPoint, Point, Result};

/// Condition number above which the full interpolation system is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRegime {
    Linear,
    MinimumFrobenius,
    FullQuadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub center: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub regime: ModelRegime,
}

impl QuadraticModel {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn evaluate(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.len(),
            });
        }
        let s = DVector::from_iterator(
            w.len(),
            w.iter().zip(self.center.iter()).map(|(a, b)| a - b),
        );
        Ok(self.value + self.gradient.dot(&s) + 0.5 * s.dot(&(&self.hessian * &s)))
    }
}

/// Fits a quadratic model around `center` from the evaluated `points`.
///
/// Points that coincide with the center are ignored; `center_value` is taken
/// as `f(center)`.
pub fn build_model(
    points: &[EvaluatedPoint],
    center: &Point,
    center_value: f64,
) -> Result<QuadraticModel> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    if !center_value.is_finite() {
        return Err(Error::NonFinite("center value"));
    }
    let d = center.dim();
    let mut disp = Vec::with_capacity(points.len());
    let mut rhs = Vec::with_capacity(points.len());
    for p in points {
        if p.point.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.point.dim(),
            });
        }
        if p.point.coincides_with(center) {
            continue;
        }
        disp.push(DVector::from_iterator(
            d,
            p.point.iter().zip(center.iter()).map(|(a, b)| a - b),
        ));
        rhs.push(p.value - center_value);
    }
    if disp.is_empty() {
        return Err(Error::DegenerateGeometry);
    }

    let scale = disp.iter().map(|y| y.norm()).fold(0.0f64, f64::max);
    let scaled: Vec<DVector<f64>> = disp.iter().map(|y| y / scale).collect();
    let n = scaled.len();
    let full = crate::InterpolationSet::capacity_for(d) - 1;

    let (g, h, regime) = if n < d {
        let g = fit_linear(&scaled, &rhs);
        (g, DMatrix::zeros(d, d), ModelRegime::Linear)
    } else if n < full {
        let (g, h) = fit_min_frobenius(&scaled, &rhs);
        (g, h, ModelRegime::MinimumFrobenius)
    } else {
        fit_full(&scaled, &rhs)
    };

    let gradient = g / scale;
    let mut hessian = h / (scale * scale);
    symmetrize(&mut hessian);
    if gradient
        .iter()
        .chain(hessian.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("model coefficients"));
    }
    Ok(QuadraticModel {
        center: DVector::from_column_slice(center.as_slice()),
        value: center_value,
        gradient,
        hessian,
        regime,
    })
}

fn symmetrize(h: &mut DMatrix<f64>) {
    let d = h.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
}

fn pinv_solve(m: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = SVD::new(m, true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-13).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("SVD computed with both U and V")
}

fn fit_linear(disp: &[DVector<f64>], rhs: &[f64]) -> DVector<f64> {
    let d = disp[0].len();
    let y = DMatrix::from_fn(disp.len(), d, |r, c| disp[r][c]);
    pinv_solve(y, &DVector::from_column_slice(rhs))
}

/// Minimizes `‖H‖_F` subject to the interpolation conditions. With
/// `H = Σ λᵢ yᵢyᵢᵀ` the optimality conditions form the symmetric system
/// `[A Y; Yᵀ 0] [λ; g] = [δf; 0]` with `Aᵢⱼ = ½ (yᵢᵀyⱼ)²`.
fn fit_min_frobenius(disp: &[DVector<f64>], rhs: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = disp.len();
    let d = disp[0].len();
    let mut kkt = DMatrix::zeros(n + d, n + d);
    for i in 0..n {
        for j in 0..=i {
            let ip = disp[i].dot(&disp[j]);
            let v = 0.5 * ip * ip;
            kkt[(i, j)] = v;
            kkt[(j, i)] = v;
        }
        for k in 0..d {
            kkt[(i, n + k)] = disp[i][k];
            kkt[(n + k, i)] = disp[i][k];
        }
    }
    let mut b = DVector::zeros(n + d);
    b.rows_mut(0, n).copy_from_slice(rhs);
    let sol = pinv_solve(kkt, &b);
    let g = sol.rows(n, d).into_owned();
    let mut h = DMatrix::zeros(d, d);
    for (i, y) in disp.iter().enumerate() {
        h.ger(sol[i], y, y, 1.0);
    }
    (g, h)
}

fn monomial_row(y: &DVector<f64>) -> Vec<f64> {
    let d = y.len();
    let mut row = Vec::with_capacity(d + d * (d + 1) / 2);
    row.extend(y.iter());
    for i in 0..d {
        row.push(0.5 * y[i] * y[i]);
        for j in (i + 1)..d {
            row.push(y[i] * y[j]);
        }
    }
    row
}

fn fit_full(disp: &[DVector<f64>], rhs: &[f64]) -> (DVector<f64>, DMatrix<f64>, ModelRegime) {
    let d = disp[0].len();
    let cols = d + d * (d + 1) / 2;
    let rows: Vec<Vec<f64>> = disp.iter().map(monomial_row).collect();
    let m = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let svd = SVD::new(m, true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0 && smax / smin <= SINGULAR_CONDITION) {
        // The left singular vector of the smallest singular value points at
        // the row that spoils the system.
        let u = svd.u.as_ref().expect("U requested");
        let k = sv.imin();
        let worst = (0..u.nrows())
            .max_by(|&a, &b| u[(a, k)].abs().total_cmp(&u[(b, k)].abs()))
            .unwrap_or(0);
        let kept: Vec<DVector<f64>> = disp
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != worst)
            .map(|(_, y)| y.clone())
            .collect();
        let kept_rhs: Vec<f64> = rhs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != worst)
            .map(|(_, v)| *v)
            .collect();
        if kept.len() < d {
            return (
                fit_linear(&kept, &kept_rhs),
                DMatrix::zeros(d, d),
                ModelRegime::Linear,
            );
        }
        let (g, h) = fit_min_frobenius(&kept, &kept_rhs);
        return (g, h, ModelRegime::MinimumFrobenius);
    }
    let coef = svd
        .solve(&DVector::from_column_slice(rhs), 0.0)
        .expect("SVD computed with both U and V");
    let g = coef.rows(0, d).into_owned();
    let mut h = DMatrix::zeros(d, d);
    let mut k = d;
    for i in 0..d {
        h[(i, i)] = coef[k];
        k += 1;
        for j in (i + 1)..d {
            h[(i, j)] = coef[k];
            h[(j, i)] = coef[k];
            k += 1;
        }
    }
    (g, h, ModelRegime::FullQuadratic)
}
