use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Smallest penalty used when the unpenalized normal equations are singular.
pub const LAMBDA_FLOOR: f64 = 1e-10;
const SINGULAR_PIVOT_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeParams {
    pub lambda: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        RidgeParams { lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Set when the solve needed [`LAMBDA_FLOOR`].
    pub lambda_floored: bool,
}

/// Minimizes `‖y − Xw − c‖² + λ‖w‖²` in closed form on centred data; the
/// intercept is not penalized.
pub fn ridge_fit(x: &DenseMatrix, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 || n != y.len() {
        return Err(Error::invalid(format!(
            "ridge needs matching non-empty inputs ({n} rows, {} targets)",
            y.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let mut means = vec![0.0; p];
    for row in x.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let gram = xc.tr_mul(&xc);
    let rhs = xc.tr_mul(&yc);

    let solve = |lam: f64| {
        let mut a = gram.clone();
        for i in 0..p {
            a[(i, i)] += lam;
        }
        let scale = (0..p).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let chol = a.cholesky()?;
        // below the floor, a rounding-level pivot means the system is singular
        if lam < LAMBDA_FLOOR {
            let l = chol.l_dirty();
            if (0..p).any(|i| l[(i, i)] * l[(i, i)] <= SINGULAR_PIVOT_REL * scale) {
                return None;
            }
        }
        Some(chol.solve(&rhs))
    };
    let (w, floored) = match solve(lambda) {
        Some(w) if w.iter().all(|v| v.is_finite()) => (w, false),
        _ if lambda < LAMBDA_FLOOR => {
            log::warn!("ridge normal equations singular at lambda = {lambda}; using {LAMBDA_FLOOR}");
            let w = solve(LAMBDA_FLOOR)
                .ok_or_else(|| Error::Training("ridge system singular even with lambda floor".into()))?;
            (w, true)
        }
        _ => return Err(Error::Training(format!("ridge solve failed at lambda = {lambda}"))),
    };
    let coefficients: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    Ok(RidgeModel {
        coefficients,
        intercept,
        lambda,
        lambda_floored: floored,
    })
}

pub fn ridge_predict(model: &RidgeModel, x: &DenseMatrix) -> Result<Vec<f64>> {
    if x.cols() != model.coefficients.len() {
        return Err(Error::Dimension {
            expected: model.coefficients.len(),
            got: x.cols(),
        });
    }
    Ok(x.iter_rows()
        .map(|r| {
            model.intercept + r.iter().zip(&model.coefficients).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect())
}

/// `‖y − Xw − c‖² + λ‖w‖²` for arbitrary coefficients.
pub fn ridge_objective(x: &DenseMatrix, y: &[f64], w: &[f64], c: f64, lambda: f64) -> f64 {
    let sse: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, t)| {
            let p = c + r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            (t - p).powi(2)
        })
        .sum();
    sse + lambda * w.iter().map(|v| v * v).sum::<f64>()
}
