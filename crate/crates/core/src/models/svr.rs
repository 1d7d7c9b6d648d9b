use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{rng_from_seed, shuffle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    /// Inverse regularisation strength; the penalty weight is `1 / (C n)`.
    pub c: f64,
    /// Half-width of the insensitive tube, in response units.
    pub epsilon: f64,
    pub epochs: usize,
    /// Step size at epoch 0; epoch `e` uses `eta0 / sqrt(1 + e)`.
    pub eta0: f64,
    pub seed: u64,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            epochs: 50,
            eta0: 0.1,
            seed: 0,
        }
    }
}

impl SvrParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("SVR C must be positive"));
        }
        if !(self.epsilon >= 0.0) || !(self.eta0 > 0.0) || self.epochs == 0 {
            return Err(invalid("SVR needs epsilon >= 0, eta0 > 0 and at least one epoch"));
        }
        Ok(())
    }
}

/// Linear ε-SVR in standardised feature and response space. Features with
/// zero training variance carry weight 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub params: SvrParams,
    pub feature_mean: Vec<f64>,
    pub feature_sd: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl SvrModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut s = self.intercept;
        for j in 0..self.weights.len() {
            if self.feature_sd[j] > 0.0 {
                s += self.weights[j] * (x[j] - self.feature_mean[j]) / self.feature_sd[j];
            }
        }
        self.y_mean + self.y_scale * s
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Averaged stochastic subgradient descent on
/// `λ/2 |w|² + mean(max(0, |y - w·x - b| - ε))` with `λ = 1/(C n)`.
/// Each epoch visits rows in a fresh seeded permutation; the returned
/// weights average the iterates of the second half of training.
pub fn fit_svr(x: &Matrix, y: &[f64], params: &SvrParams) -> Result<SvrModel> {
    params.validate()?;
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::Empty("SVR training set"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let (mut feature_mean, mut feature_sd) = (vec![0.0; d], vec![0.0; d]);
    for j in 0..d {
        let (m, s) = mean_sd(&x.column(j));
        feature_mean[j] = m;
        feature_sd[j] = if s > 1e-12 * m.abs().max(1.0) { s } else { 0.0 };
        if feature_sd[j] == 0.0 {
            warn!("SVR ignores feature {j}: zero variance in the training set");
        }
    }
    let (y_mean, y_sd) = mean_sd(y);
    let y_scale = if y_sd > 0.0 { y_sd } else { 1.0 };
    let eps = params.epsilon / y_scale;
    let z: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            (0..d)
                .map(|j| if feature_sd[j] > 0.0 { (x.get(r, j) - feature_mean[j]) / feature_sd[j] } else { 0.0 })
                .collect()
        })
        .collect();
    let t: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

    let lambda = 1.0 / (params.c * n as f64);
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut w_avg, mut b_avg, mut n_avg) = (vec![0.0; d], 0.0, 0usize);
    let avg_from = params.epochs / 2;
    let mut rng = rng_from_seed(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        let eta = params.eta0 / ((1 + epoch) as f64).sqrt();
        shuffle(&mut rng, &mut order);
        for &i in &order {
            let pred = b + w.iter().zip(&z[i]).map(|(a, c)| a * c).sum::<f64>();
            let r = t[i] - pred;
            let g = if r > eps {
                1.0
            } else if r < -eps {
                -1.0
            } else {
                0.0
            };
            for (wj, zj) in w.iter_mut().zip(&z[i]) {
                *wj += eta * (g * zj - lambda * *wj);
            }
            b += eta * g;
            if epoch >= avg_from {
                n_avg += 1;
                let k = 1.0 / n_avg as f64;
                for (a, wj) in w_avg.iter_mut().zip(&w) {
                    *a += (wj - *a) * k;
                }
                b_avg += (b - b_avg) * k;
            }
        }
    }
    Ok(SvrModel {
        params: *params,
        feature_mean,
        feature_sd,
        y_mean,
        y_scale,
        weights: w_avg,
        intercept: b_avg,
    })
}

pub fn predict_svr(model: &SvrModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.weights.len() {
        return Err(Error::DimensionMismatch { expected: model.weights.len(), got: x.cols() });
    }
    Ok(x.iter_rows().map(|r| model.predict_row(r)).collect())
}
