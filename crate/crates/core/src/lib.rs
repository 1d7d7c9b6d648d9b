//! Spatial statistics and interpretable regression for area-level health data.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`ingest`]: unit/facility schemas, CSV parsing, eligibility filtering,
//!   response construction, summary tables and a synthetic data generator.
//! * [`geo`]: great-circle distances, an exact spatial index and the
//!   facility-accessibility features.
//! * [`impute`]: nearest-neighbour imputation of missing covariates.
//! * [`spatial_stats`]: spatial weights, Getis-Ord Gi* hot/cold spots and
//!   Jenks natural breaks.
//! * [`models`]: random forest, least squares and linear epsilon-SVR
//!   regressors with cross-validated grid search.
//! * [`explain`]: exact interventional Shapley values for forests, with a
//!   brute-force reference implementation.

// Negated float comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod explain;
pub mod geo;
pub mod impute;
pub mod ingest;
pub mod matrix;
pub mod models;
pub mod normal;
pub mod rng;
pub mod spatial_stats;

pub use error::{Error, Result};
pub use explain::{ImportanceRanking, ShapMatrix};
pub use geo::{GeoPoint, SpatialIndex};
pub use impute::ImputationReport;
pub use ingest::{Dataset, FacilitySet, FeatureKind, FeatureSpec, Schema, UnitRecord, ValidationReport};
pub use matrix::Matrix;
pub use models::{ForestConfig, ForestModel, LinearModel, Metrics, SvrModel};
pub use spatial_stats::{GiResult, HotspotClass, JenksBreaks, SpatialWeights};
