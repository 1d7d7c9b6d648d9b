use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, DecisionTree, TreeParams};
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{below, derive_seed, rng_from_seed, Rng};

pub const FOREST_FORMAT_VERSION: u32 = 1;

fn default_min_leaf() -> usize {
    5
}

fn default_bootstrap() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features drawn at each split.
    pub mtry: usize,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    pub seed: u64,
    /// `false` grows every tree on the full training set (diagnostic mode).
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: 4,
            min_leaf: default_min_leaf(),
            max_depth: None,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(invalid("n_trees must be at least 1"));
        }
        if self.mtry == 0 || self.mtry > n_features {
            return Err(invalid(format!("mtry {} outside 1..={n_features}", self.mtry)));
        }
        if self.min_leaf == 0 {
            return Err(invalid("min_leaf must be positive"));
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            mtry: self.mtry,
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
        }
    }

    /// Seed of the RNG that draws tree `t`'s bootstrap and split features.
    pub fn tree_seed(&self, t: usize) -> u64 {
        derive_seed(self.seed, t as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub config: ForestConfig,
    pub n_features: usize,
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Assembles a forest from prebuilt trees; used for hand-built models.
    pub fn from_trees(trees: Vec<DecisionTree>, config: ForestConfig) -> Result<Self> {
        let n_features = trees.first().ok_or(Error::Empty("forest has no trees"))?.n_features;
        for t in &trees {
            if t.n_features != n_features {
                return Err(Error::DimensionMismatch { expected: n_features, got: t.n_features });
            }
            t.validate()?;
        }
        Ok(Self {
            format_version: FOREST_FORMAT_VERSION,
            tree_seeds: (0..trees.len()).map(|t| config.tree_seed(t)).collect(),
            config: ForestConfig { n_trees: trees.len(), ..config },
            n_features,
            feature_names: Vec::new(),
            trees,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: names.len() });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| invalid(format!("forest serialization: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| invalid(format!("forest JSON: {e}")))?;
        if m.format_version != FOREST_FORMAT_VERSION {
            return Err(invalid(format!("unsupported forest format version {}", m.format_version)));
        }
        if m.trees.is_empty() || m.trees.len() != m.tree_seeds.len() {
            return Err(invalid("forest JSON has inconsistent tree list"));
        }
        for t in &m.trees {
            if t.n_features != m.n_features {
                return Err(Error::DimensionMismatch { expected: m.n_features, got: t.n_features });
            }
            t.validate()?;
        }
        Ok(m)
    }
}

/// `n` positions drawn uniformly with replacement.
pub fn bootstrap_sample(rng: &mut Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| below(rng, n)).collect()
}

/// Tree `t` uses one RNG seeded from `(config.seed, t)`: first for its
/// bootstrap, then for the per-node feature draws.
pub fn fit_forest(x: &Matrix, y: &[f64], config: &ForestConfig) -> Result<ForestModel> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::Empty("forest training set"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    config.validate(x.cols())?;
    let params = config.tree_params();
    let tree_seeds: Vec<u64> = (0..config.n_trees).map(|t| config.tree_seed(t)).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = rng_from_seed(seed);
            if config.bootstrap {
                let idx = bootstrap_sample(&mut rng, n);
                let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
                fit_tree(&x.select_rows(&idx), &yb, &params, &mut rng)
            } else {
                fit_tree(x, y, &params, &mut rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        format_version: FOREST_FORMAT_VERSION,
        config: config.clone(),
        n_features: x.cols(),
        feature_names: Vec::new(),
        tree_seeds,
        trees,
    })
}

/// Mean of the tree predictions for each row.
pub fn predict_forest(model: &ForestModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.n_features {
        return Err(Error::DimensionMismatch { expected: model.n_features, got: x.cols() });
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    Ok(rows.par_iter().map(|&r| model.predict_row(x.row(r))).collect())
}
