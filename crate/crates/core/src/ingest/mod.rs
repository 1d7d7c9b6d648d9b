//! Unit and facility data model, CSV schemas, eligibility and response.

mod io;
mod summary;
pub mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geo::{GeoPoint, SpatialIndex};
use crate::matrix::Matrix;

pub use io::{parse_facilities, parse_units, write_facilities, write_units, RowError, RowErrorKind, ValidationReport};
pub use summary::{summarize, CategoryCount, Summary, VariableSummary};

pub const ID_COLUMN: &str = "id";
pub const LAT_COLUMN: &str = "lat";
pub const LON_COLUMN: &str = "lon";
pub const RATE_Y1_COLUMN: &str = "rate_y1";
pub const RATE_Y2_COLUMN: &str = "rate_y2";
pub const REQUIRED_COLUMNS: [&str; 5] = [ID_COLUMN, LAT_COLUMN, LON_COLUMN, RATE_Y1_COLUMN, RATE_Y2_COLUMN];

pub const NEAREST_FACILITY_FEATURE: &str = "nearest_facility_miles";
pub const FACILITY_COUNT_FEATURE: &str = "facilities_10mi";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Imputed by neighbour mean.
    Numeric,
    /// Stored as 0/1, imputed by neighbour mode.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub description: String,
}

impl FeatureSpec {
    pub fn numeric(name: &str, description: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Numeric,
            description: description.to_owned(),
        }
    }

    pub fn binary(name: &str, description: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Binary,
            description: description.to_owned(),
        }
    }
}

/// Ordered covariate list. Names are unique and must not collide with the
/// required columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureSpec>", into = "Vec<FeatureSpec>")]
pub struct Schema {
    features: Vec<FeatureSpec>,
}

impl TryFrom<Vec<FeatureSpec>> for Schema {
    type Error = Error;

    fn try_from(features: Vec<FeatureSpec>) -> Result<Self> {
        Schema::new(features)
    }
}

impl From<Schema> for Vec<FeatureSpec> {
    fn from(s: Schema) -> Self {
        s.features
    }
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(invalid("empty feature name"));
            }
            if REQUIRED_COLUMNS.contains(&f.name.as_str()) {
                return Err(invalid(format!("feature name `{}` clashes with a required column", f.name)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(invalid(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(Self { features })
    }

    /// The eleven area-level covariates read from `units.csv`.
    pub fn default_base() -> Self {
        Self::new(vec![
            FeatureSpec::binary("urban", "Urban (1) or rural (0) tract"),
            FeatureSpec::numeric("pop_density", "People per square mile"),
            FeatureSpec::numeric("women_55plus_pct", "Percent of the female population aged 55 or above"),
            FeatureSpec::numeric("poverty_pct", "Percent of people living in poverty"),
            FeatureSpec::numeric("uninsured_pct", "Percent of the population without health insurance"),
            FeatureSpec::numeric("higher_ed_pct", "Percent of adults 25+ with a bachelor's degree or higher"),
            FeatureSpec::numeric("black_pct", "Percent of the population that is Black or African American"),
            FeatureSpec::numeric("hispanic_pct", "Percent of the population that is Hispanic or Latino"),
            FeatureSpec::numeric("home_value", "Median value of owner-occupied housing, USD"),
            FeatureSpec::numeric("svi", "Social vulnerability index"),
            FeatureSpec::binary("pc_shortage", "Primary care shortage area (1) or not (0)"),
        ])
        .expect("static schema is valid")
    }

    /// The two facility-accessibility features derived from facility locations.
    pub fn accessibility_features() -> [FeatureSpec; 2] {
        [
            FeatureSpec::numeric(NEAREST_FACILITY_FEATURE, "Miles from the unit centroid to the nearest facility"),
            FeatureSpec::numeric(FACILITY_COUNT_FEATURE, "Facilities within a 10-mile radius of the unit centroid"),
        ]
    }

    /// The full thirteen-variable schema: base covariates plus accessibility.
    pub fn default_full() -> Self {
        let mut features = Self::default_base().features;
        features.extend(Self::accessibility_features());
        Self::new(features).expect("static schema is valid")
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    fn push(&mut self, spec: FeatureSpec) -> Result<()> {
        if self.contains(&spec.name) || REQUIRED_COLUMNS.contains(&spec.name.as_str()) {
            return Err(invalid(format!("feature `{}` already present", spec.name)));
        }
        self.features.push(spec);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: String,
    pub centroid: GeoPoint,
    pub rate_y1: Option<f64>,
    pub rate_y2: Option<f64>,
    /// Aligned with the dataset schema; `None` marks a missing cell.
    pub features: Vec<Option<f64>>,
}

impl UnitRecord {
    pub fn is_eligible(&self) -> bool {
        self.rate_y1.is_some() && self.rate_y2.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub units: Vec<UnitRecord>,
    /// One value per unit once [`build_response`] has run.
    pub response: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(schema: Schema, units: Vec<UnitRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(units.len());
        for u in &units {
            if u.features.len() != schema.len() {
                return Err(Error::DimensionMismatch {
                    expected: schema.len(),
                    got: u.features.len(),
                });
            }
            if !seen.insert(u.id.as_str()) {
                return Err(Error::DuplicateId(u.id.clone()));
            }
        }
        Ok(Self {
            schema,
            units,
            response: None,
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.units.iter().map(|u| u.id.as_str()).collect()
    }

    pub fn centroids(&self) -> Vec<GeoPoint> {
        self.units.iter().map(|u| u.centroid).collect()
    }

    /// Index over unit centroids, keyed by unit id.
    pub fn spatial_index(&self) -> Result<SpatialIndex> {
        SpatialIndex::build(self.units.iter().map(|u| (u.id.clone(), u.centroid)))
    }

    pub fn missing_cells(&self) -> usize {
        self.units.iter().map(|u| u.features.iter().filter(|v| v.is_none()).count()).sum()
    }

    /// Appends a fully-populated feature column.
    pub fn append_feature(&mut self, spec: FeatureSpec, values: &[f64]) -> Result<()> {
        if values.len() != self.units.len() {
            return Err(Error::DimensionMismatch {
                expected: self.units.len(),
                got: values.len(),
            });
        }
        self.schema.push(spec)?;
        for (u, &v) in self.units.iter_mut().zip(values) {
            u.features.push(Some(v));
        }
        Ok(())
    }

    /// Reorders units by ascending id, carrying the response along.
    pub fn sort_by_id(&mut self) {
        let mut order: Vec<usize> = (0..self.units.len()).collect();
        order.sort_by(|&a, &b| self.units[a].id.cmp(&self.units[b].id));
        self.units = order.iter().map(|&i| self.units[i].clone()).collect();
        if let Some(r) = &self.response {
            self.response = Some(order.iter().map(|&i| r[i]).collect());
        }
    }

    /// Covariate matrix; fails if any cell is still missing.
    pub fn feature_matrix(&self) -> Result<Matrix> {
        let d = self.schema.len();
        let mut m = Matrix::zeros(self.units.len(), d);
        for (i, u) in self.units.iter().enumerate() {
            for (j, v) in u.features.iter().enumerate() {
                let v = v.ok_or_else(|| {
                    invalid(format!("unit `{}` has a missing `{}` value; impute first", u.id, self.schema.features[j].name))
                })?;
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn response(&self) -> Result<&[f64]> {
        self.response.as_deref().ok_or_else(|| invalid("response not built"))
    }

    /// Values of a rate column; fails on a missing rate.
    pub fn rate_column(&self, column: RateColumn) -> Result<Vec<f64>> {
        self.units
            .iter()
            .map(|u| {
                let v = match column {
                    RateColumn::Y1 => u.rate_y1,
                    RateColumn::Y2 => u.rate_y2,
                };
                v.ok_or_else(|| Error::MissingRate { unit: u.id.clone() })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateColumn {
    Y1,
    Y2,
}

impl RateColumn {
    pub fn name(self) -> &'static str {
        match self {
            RateColumn::Y1 => RATE_Y1_COLUMN,
            RateColumn::Y2 => RATE_Y2_COLUMN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityRecord {
    pub id: String,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FacilitySet {
    pub facilities: Vec<FacilityRecord>,
}

impl FacilitySet {
    pub fn new(facilities: Vec<FacilityRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(facilities.len());
        for f in &facilities {
            if !seen.insert(f.id.as_str()) {
                return Err(Error::DuplicateId(f.id.clone()));
            }
        }
        Ok(Self { facilities })
    }

    pub fn len(&self) -> usize {
        self.facilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facilities.is_empty()
    }

    pub fn spatial_index(&self) -> Result<SpatialIndex> {
        SpatialIndex::build(self.facilities.iter().map(|f| (f.id.clone(), f.location)))
    }
}

/// Keeps the units that have both screening rates, preserving order.
pub fn filter_eligible(dataset: &Dataset) -> Dataset {
    Dataset {
        schema: dataset.schema.clone(),
        units: dataset.units.iter().filter(|u| u.is_eligible()).cloned().collect(),
        response: None,
    }
}

/// Sets the response to the mean of the two yearly rates.
pub fn build_response(mut dataset: Dataset) -> Result<Dataset> {
    let response = dataset
        .units
        .iter()
        .map(|u| match (u.rate_y1, u.rate_y2) {
            (Some(a), Some(b)) => Ok((a + b) / 2.0),
            _ => Err(Error::MissingRate { unit: u.id.clone() }),
        })
        .collect::<Result<Vec<_>>>()?;
    dataset.response = Some(response);
    Ok(dataset)
}

/// Appends nearest-facility distance and 10-mile facility count columns.
pub fn add_accessibility_features(dataset: &mut Dataset, facilities: &FacilitySet) -> Result<()> {
    let index = facilities.spatial_index()?;
    let (nearest, count) = crate::geo::accessibility_features(&dataset.centroids(), &index, crate::geo::CATCHMENT_MILES)?;
    let [near_spec, count_spec] = Schema::accessibility_features();
    dataset.append_feature(near_spec, &nearest)?;
    dataset.append_feature(count_spec, &count)?;
    Ok(())
}
