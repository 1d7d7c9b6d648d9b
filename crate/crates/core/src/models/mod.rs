//! Regression models, data splitting and cross-validated model selection.

mod cv;
mod forest;
mod linear;
mod metrics;
mod split;
mod svr;
mod tree;

use serde::{Deserialize, Serialize};

pub use cv::{grid_search_cv, CvRow, CvTable, ForestGrid};
pub use forest::{bootstrap_sample, fit_forest, predict_forest, ForestConfig, ForestModel, FOREST_FORMAT_VERSION};
pub use linear::{fit_ols, predict_linear, LinearModel};
pub use metrics::{r2, rmse, Metrics};
pub use split::{kfold, train_test_split, FoldAssignment, SplitSpec};
pub use svr::{fit_svr, predict_svr, SvrModel, SvrParams};
pub use tree::{fit_tree, DecisionTree, Node, TreeParams};

use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub r2: f64,
    pub rmse: f64,
}

/// Held-out performance of the three regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_train: usize,
    pub n_test: usize,
    pub scores: Vec<ModelScore>,
    pub forest_config: ForestConfig,
}

impl ComparisonReport {
    pub fn score(&self, model: &str) -> Option<&ModelScore> {
        self.scores.iter().find(|s| s.model == model)
    }
}

pub const RANDOM_FOREST: &str = "random_forest";
pub const LINEAR_REGRESSION: &str = "linear_regression";
pub const SVR: &str = "svr";

#[derive(Debug, Clone)]
pub struct FittedModels {
    pub forest: ForestModel,
    pub linear: LinearModel,
    pub svr: SvrModel,
    pub report: ComparisonReport,
}

/// Fits all three models on the training rows and scores them on the test rows.
pub fn compare_models(
    x_train: &Matrix,
    y_train: &[f64],
    x_test: &Matrix,
    y_test: &[f64],
    forest_config: &ForestConfig,
    svr_params: &SvrParams,
) -> Result<FittedModels> {
    let forest = fit_forest(x_train, y_train, forest_config)?;
    let linear = fit_ols(x_train, y_train)?;
    let svr = fit_svr(x_train, y_train, svr_params)?;
    let score = |name: &str, pred: Vec<f64>| -> Result<ModelScore> {
        let m = Metrics::evaluate(&pred, y_test)?;
        Ok(ModelScore {
            model: name.to_owned(),
            r2: m.r2,
            rmse: m.rmse,
        })
    };
    let scores = vec![
        score(RANDOM_FOREST, predict_forest(&forest, x_test)?)?,
        score(LINEAR_REGRESSION, predict_linear(&linear, x_test)?)?,
        score(SVR, predict_svr(&svr, x_test)?)?,
    ];
    let report = ComparisonReport {
        n_train: y_train.len(),
        n_test: y_test.len(),
        scores,
        forest_config: forest_config.clone(),
    };
    Ok(FittedModels {
        forest,
        linear,
        svr,
        report,
    })
}
