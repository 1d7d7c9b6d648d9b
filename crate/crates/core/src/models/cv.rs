use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{fit_forest, predict_forest, ForestConfig};
use super::metrics::rmse;
use super::split::kfold;
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::derive_seed;

/// Hyperparameter grid searched by [`grid_search_cv`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub mtry: Vec<usize>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![100, 300, 500],
            mtry: vec![2, 4, 6, 8],
        }
    }
}

impl ForestGrid {
    /// Cells sorted by `(n_trees, mtry)`, duplicates removed.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut c: Vec<(usize, usize)> =
            self.n_trees.iter().flat_map(|&t| self.mtry.iter().map(move |&m| (t, m))).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub n_trees: usize,
    pub mtry: usize,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<CvRow>,
    pub best: usize,
}

/// Scores every grid cell by mean validation RMSE over `k` folds. Fold `f`
/// fits with forest seed `derive_seed(seed, f)` in every cell, so cells differ
/// only in their hyperparameters. The returned config is `base` with the
/// winning `n_trees` and `mtry`.
pub fn grid_search_cv(
    x: &Matrix,
    y: &[f64],
    grid: &ForestGrid,
    base: &ForestConfig,
    k: usize,
    seed: u64,
) -> Result<(ForestConfig, CvTable)> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch { expected: x.rows(), got: y.len() });
    }
    for &(t, m) in &cells {
        ForestConfig { n_trees: t, mtry: m, ..base.clone() }
            .validate(x.cols())
            .map_err(|e| invalid(format!("grid cell (n_trees={t}, mtry={m}): {e}")))?;
    }
    let all: Vec<usize> = (0..x.rows()).collect();
    let folds = kfold(&all, k, seed)?;
    let parts: Vec<(Matrix, Vec<f64>, Matrix, Vec<f64>)> = (0..k)
        .map(|f| {
            let (tr, va) = (folds.training(f), folds.validation(f));
            (
                x.select_rows(&tr),
                tr.iter().map(|&i| y[i]).collect(),
                x.select_rows(&va),
                va.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();
    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let scores = tasks
        .par_iter()
        .map(|&(c, f)| {
            let (n_trees, mtry) = cells[c];
            let cfg = ForestConfig {
                n_trees,
                mtry,
                seed: derive_seed(seed, f as u64),
                ..base.clone()
            };
            let (xt, yt, xv, yv) = &parts[f];
            let model = fit_forest(xt, yt, &cfg)?;
            rmse(&predict_forest(&model, xv)?, yv)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<CvRow> = cells
        .iter()
        .enumerate()
        .map(|(c, &(n_trees, mtry))| {
            let fold_rmse = scores[c * k..(c + 1) * k].to_vec();
            let mean_rmse = fold_rmse.iter().sum::<f64>() / k as f64;
            CvRow { n_trees, mtry, fold_rmse, mean_rmse }
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean_rmse < rows[best].mean_rmse {
            best = i;
        }
    }
    let chosen = ForestConfig {
        n_trees: rows[best].n_trees,
        mtry: rows[best].mtry,
        ..base.clone()
    };
    Ok((chosen, CvTable { k, seed, rows, best }))
}
