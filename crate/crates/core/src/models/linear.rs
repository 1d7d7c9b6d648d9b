use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// Relative size of the smallest diagonal entry of R below which the
/// column-normalised design counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Least squares with an intercept via Householder QR on the design with
/// unit-norm columns.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n <= d {
        return Err(invalid(format!("least squares needs more rows ({n}) than features ({d})")));
    }
    let p = d + 1;
    let mut design = DMatrix::<f64>::from_fn(n, p, |r, c| if c == 0 { 1.0 } else { x.get(r, c - 1) });
    let mut scale = vec![0.0; p];
    for (c, s) in scale.iter_mut().enumerate() {
        let norm = design.column(c).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::SingularDesign);
        }
        design.column_mut(c).scale_mut(1.0 / norm);
        *s = norm;
    }
    let qr = design.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&v| v <= RANK_TOL * max) {
        return Err(Error::SingularDesign);
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::SingularDesign)?;
    let coef: Vec<f64> = (0..p).map(|i| beta[i] / scale[i]).collect();
    Ok(LinearModel {
        intercept: coef[0],
        coefficients: coef[1..].to_vec(),
    })
}

pub fn predict_linear(model: &LinearModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.coefficients.len() {
        return Err(Error::DimensionMismatch { expected: model.coefficients.len(), got: x.cols() });
    }
    Ok(x.iter_rows().map(|r| model.predict_row(r)).collect())
}
