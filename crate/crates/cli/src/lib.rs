//! Command-line front end for tractlens: configuration, on-disk artifacts and
//! the pipeline stages.

// Negated float comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;
pub mod synth;
