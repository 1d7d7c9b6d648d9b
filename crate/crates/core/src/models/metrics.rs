use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn evaluate(pred: &[f64], obs: &[f64]) -> Result<Self> {
        Ok(Self {
            r2: r2(pred, obs)?,
            rmse: rmse(pred, obs)?,
        })
    }
}

fn check(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: pred.len(),
        });
    }
    if obs.is_empty() {
        return Err(Error::Empty("no observations to score"));
    }
    Ok(())
}

fn sse(pred: &[f64], obs: &[f64]) -> f64 {
    pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum()
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    Ok((sse(pred, obs) / obs.len() as f64).sqrt())
}

/// `1 - SSE / SST`.
pub fn r2(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let sst: f64 = obs.iter().map(|o| (o - mean) * (o - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(1.0 - sse(pred, obs) / sst)
}
