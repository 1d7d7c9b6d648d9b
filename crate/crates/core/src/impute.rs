//! Nearest-neighbour imputation of missing covariates.
//!
//! A missing numeric cell takes the mean of the `k` nearest other units
//! that have the feature present; a missing binary cell takes their mode,
//! with ties going to 0. Neighbours are ordered by great-circle distance
//! between centroids and then by id. When fewer than `k` of the nearest
//! units carry the feature, the search keeps widening outward so every
//! imputed value averages exactly `k` donors (or all donors, if the whole
//! dataset has fewer). Only original values are ever used as donors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geo::SpatialIndex;
use crate::ingest::{Dataset, FeatureKind};

/// Neighbour count used for imputation by default.
pub const DEFAULT_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeRule {
    Mean,
    Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProvenance {
    pub unit: String,
    pub feature: String,
    pub rule: ImputeRule,
    pub value: f64,
    /// Donor unit ids, nearest first.
    pub donors: Vec<String>,
    /// Some donors lie beyond the `k` nearest other units.
    pub widened: bool,
    /// Fewer than `k` donors exist in the whole dataset.
    pub short: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImputed {
    pub feature: String,
    pub imputed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub k: usize,
    pub per_feature: Vec<FeatureImputed>,
    pub cells: Vec<CellProvenance>,
}

impl ImputationReport {
    pub fn total_imputed(&self) -> usize {
        self.cells.len()
    }
}

/// Fills every missing covariate. `index` must be built over the dataset's
/// unit centroids in dataset order (see [`Dataset::spatial_index`]).
pub fn impute_knn(dataset: &Dataset, index: &SpatialIndex, k: usize) -> Result<(Dataset, ImputationReport)> {
    if k == 0 {
        return Err(invalid("imputation k must be at least 1"));
    }
    if index.len() != dataset.len() || dataset.units.iter().enumerate().any(|(i, u)| index.id(i) != u.id) {
        return Err(invalid("spatial index does not match the dataset units"));
    }
    let d = dataset.schema.len();
    let n = dataset.len();
    let present: Vec<usize> = (0..d)
        .map(|j| dataset.units.iter().filter(|u| u.features[j].is_some()).count())
        .collect();
    for (j, spec) in dataset.schema.features().iter().enumerate() {
        if present[j] == 0 && n > 0 {
            return Err(Error::UnimputableFeature(spec.name.clone()));
        }
    }

    let per_unit: Vec<Vec<(usize, CellProvenance)>> = dataset
        .units
        .par_iter()
        .enumerate()
        .map(|(i, unit)| {
            let missing: Vec<usize> = (0..d).filter(|&j| unit.features[j].is_none()).collect();
            if missing.is_empty() {
                return Vec::new();
            }
            // Donors available to this unit for feature j (never itself: its cell is missing).
            let needed: Vec<usize> = missing.iter().map(|&j| k.min(present[j])).collect();
            let mut m = (k + 1).min(n);
            let neighbours = loop {
                let nb = index.k_nearest(unit.centroid, m);
                let enough = missing.iter().zip(&needed).all(|(&j, &need)| {
                    nb.iter().filter(|x| x.index != i && dataset.units[x.index].features[j].is_some()).count() >= need
                });
                if enough || m == n {
                    break nb;
                }
                m = (m * 2).min(n);
            };
            missing
                .iter()
                .zip(&needed)
                .map(|(&j, &need)| {
                    let mut donors = Vec::with_capacity(need);
                    let mut last_rank = 0;
                    for (rank, nb) in neighbours.iter().filter(|x| x.index != i).enumerate() {
                        if donors.len() == need {
                            break;
                        }
                        if let Some(v) = dataset.units[nb.index].features[j] {
                            donors.push((nb.index, v));
                            last_rank = rank;
                        }
                    }
                    let spec = &dataset.schema.features()[j];
                    let (rule, value) = match spec.kind {
                        FeatureKind::Numeric => (ImputeRule::Mean, donor_mean(&donors)),
                        FeatureKind::Binary => (ImputeRule::Mode, donor_mode(&donors)),
                    };
                    let cell = CellProvenance {
                        unit: unit.id.clone(),
                        feature: spec.name.clone(),
                        rule,
                        value,
                        donors: donors.iter().map(|&(idx, _)| dataset.units[idx].id.clone()).collect(),
                        widened: last_rank >= k,
                        short: need < k,
                    };
                    (j, cell)
                })
                .collect()
        })
        .collect();

    let mut out = dataset.clone();
    let mut counts = vec![0usize; d];
    let mut cells = Vec::new();
    for (unit, filled) in out.units.iter_mut().zip(per_unit) {
        for (j, cell) in filled {
            unit.features[j] = Some(cell.value);
            counts[j] += 1;
            cells.push(cell);
        }
    }
    let report = ImputationReport {
        k,
        per_feature: dataset
            .schema
            .names()
            .into_iter()
            .zip(counts)
            .map(|(f, c)| FeatureImputed {
                feature: f.to_owned(),
                imputed: c,
            })
            .collect(),
        cells,
    };
    Ok((out, report))
}

fn donor_mean(donors: &[(usize, f64)]) -> f64 {
    let sum: f64 = donors.iter().map(|&(_, v)| v).sum();
    let mean = sum / donors.len() as f64;
    let (lo, hi) = donors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    mean.clamp(lo, hi)
}

fn donor_mode(donors: &[(usize, f64)]) -> f64 {
    let ones = donors.iter().filter(|&&(_, v)| v == 1.0).count();
    if 2 * ones > donors.len() {
        1.0
    } else {
        0.0
    }
}
