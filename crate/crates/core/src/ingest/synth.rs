//! Synthetic units and facilities with known ground truth.
//!
//! Units sit on a jittered square grid around a fixed origin, so spatial
//! structure (a planted block of elevated rates) and feature effects (a
//! linear or interaction-heavy response) can be recovered and checked.

use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, FacilityRecord, FacilitySet, Schema, UnitRecord};
use crate::error::{invalid, Error, Result};
use crate::geo::GeoPoint;
use crate::rng::{below, rng_from_seed, unit_f64, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PlantedHotspot,
    LinearResponse,
    NonlinearResponse,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planted_hotspot" => Ok(Self::PlantedHotspot),
            "linear_response" => Ok(Self::LinearResponse),
            "nonlinear_response" => Ok(Self::NonlinearResponse),
            other => Err(Error::UnknownScenario(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    /// SD of the per-unit response noise.
    pub noise_sd: f64,
    /// Planted block elevation in units of `noise_sd` (or absolute when the noise is zero).
    pub hotspot_delta_sd: f64,
    /// Fraction of the block side relative to the grid side.
    pub hotspot_block_fraction: f64,
    /// Probability that any covariate cell is blanked.
    pub missing_fraction: f64,
    /// Probability that a unit loses one or both rates.
    pub ineligible_fraction: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    /// Grid spacing in degrees of latitude.
    pub spacing_deg: f64,
    /// Uniform jitter amplitude as a fraction of the spacing.
    pub jitter: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            noise_sd: 1.0,
            hotspot_delta_sd: 3.0,
            hotspot_block_fraction: 0.3,
            missing_fraction: 0.02,
            ineligible_fraction: 0.05,
            origin_lat: 35.0,
            origin_lon: -90.0,
            spacing_deg: 0.05,
            jitter: 0.15,
        }
    }
}

impl SynthOptions {
    /// No missing cells and no ineligible units.
    pub fn complete() -> Self {
        Self {
            missing_fraction: 0.0,
            ineligible_fraction: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBlock {
    pub members: Vec<String>,
    /// Members whose eight surrounding grid cells are also in the block.
    pub core: Vec<String>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: Scenario,
    pub seed: u64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub intercept: f64,
    /// Named effect terms and their weights. Linear terms are named after
    /// the raw feature they multiply.
    pub coefficients: Vec<(String, f64)>,
    pub noise_sd: f64,
    pub hotspot: Option<PlantedBlock>,
}

struct Covariate {
    binary_p: Option<f64>,
    lo: f64,
    hi: f64,
    /// Exponent applied to the uniform draw before scaling (skews the marginal).
    power: i32,
}

const COVARIATES: [Covariate; 11] = [
    Covariate { binary_p: Some(0.75), lo: 0.0, hi: 1.0, power: 1 },
    Covariate { binary_p: None, lo: 50.0, hi: 20_000.0, power: 3 },
    Covariate { binary_p: None, lo: 2.0, hi: 16.0, power: 1 },
    Covariate { binary_p: None, lo: 2.0, hi: 40.0, power: 1 },
    Covariate { binary_p: None, lo: 2.0, hi: 27.0, power: 1 },
    Covariate { binary_p: None, lo: 5.0, hi: 65.0, power: 1 },
    Covariate { binary_p: None, lo: 0.0, hi: 60.0, power: 2 },
    Covariate { binary_p: None, lo: 0.0, hi: 50.0, power: 2 },
    Covariate { binary_p: None, lo: 60_000.0, hi: 460_000.0, power: 1 },
    Covariate { binary_p: None, lo: 0.0, hi: 1.0, power: 1 },
    Covariate { binary_p: Some(0.57), lo: 0.0, hi: 1.0, power: 1 },
];

// Positions in the default base schema.
const URBAN: usize = 0;
const POVERTY: usize = 3;
const UNINSURED: usize = 4;
const HIGHER_ED: usize = 5;
const BLACK: usize = 6;
const HISPANIC: usize = 7;
const HOME_VALUE: usize = 8;

fn normal(rng: &mut Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn draw_covariate(rng: &mut Rng, c: &Covariate) -> f64 {
    let u = unit_f64(rng);
    match c.binary_p {
        Some(p) => f64::from(u8::from(u < p)),
        None => c.lo + (c.hi - c.lo) * u.powi(c.power),
    }
}

fn scaled(x: f64, j: usize) -> f64 {
    (x - COVARIATES[j].lo) / (COVARIATES[j].hi - COVARIATES[j].lo)
}

const LINEAR_INTERCEPT: f64 = 70.0;
const LINEAR_TERMS: [(usize, f64); 7] = [
    (BLACK, 0.05),
    (HIGHER_ED, 0.08),
    (HISPANIC, -0.04),
    (UNINSURED, -0.1),
    (HOME_VALUE, 1e-5),
    (POVERTY, -0.03),
    (URBAN, 0.5),
];

/// Evaluates the planted linear function on raw covariates, summing terms
/// in the recorded order.
pub fn linear_signal(features: &[f64]) -> f64 {
    LINEAR_TERMS.iter().fold(LINEAR_INTERCEPT, |acc, &(j, b)| acc + b * features[j])
}

const NONLINEAR_INTERCEPT: f64 = 74.0;
const XOR_WEIGHT: f64 = 5.0;
const SINE_WEIGHT: f64 = 3.0;
const HOME_WEIGHT: f64 = 2.0;

/// Interaction-heavy response: an XOR of two thresholded covariates, a
/// full sine period over poverty and a mild linear home-value trend.
pub fn nonlinear_signal(features: &[f64]) -> f64 {
    let b = scaled(features[BLACK], BLACK) > 0.5;
    let e = scaled(features[HIGHER_ED], HIGHER_ED) > 0.5;
    let xor = f64::from(u8::from(b != e));
    let sine = (2.0 * std::f64::consts::PI * scaled(features[POVERTY], POVERTY)).sin();
    NONLINEAR_INTERCEPT + XOR_WEIGHT * xor + SINE_WEIGHT * sine + HOME_WEIGHT * scaled(features[HOME_VALUE], HOME_VALUE)
}

const HOTSPOT_BASE: f64 = 75.0;

/// `synth_generate_with` using [`SynthOptions::default`].
pub fn synth_generate(
    n_units: usize,
    n_facilities: usize,
    seed: u64,
    scenario: Scenario,
) -> Result<(Dataset, FacilitySet, GroundTruth)> {
    synth_generate_with(n_units, n_facilities, seed, scenario, &SynthOptions::default())
}

/// Deterministic in all arguments. Units are named `U00000`, `U00001`, ...
/// in grid row-major order and use the default base schema.
pub fn synth_generate_with(
    n_units: usize,
    n_facilities: usize,
    seed: u64,
    scenario: Scenario,
    opts: &SynthOptions,
) -> Result<(Dataset, FacilitySet, GroundTruth)> {
    if n_units < 4 {
        return Err(invalid("synthetic data needs at least 4 units"));
    }
    if opts.noise_sd < 0.0 || !(0.0..=1.0).contains(&opts.missing_fraction) || !(0.0..=1.0).contains(&opts.ineligible_fraction) {
        return Err(invalid("synthetic options out of range"));
    }
    let schema = Schema::default_base();
    let mut rng = rng_from_seed(seed);

    let cols = (n_units as f64).sqrt().ceil() as usize;
    let rows = n_units.div_ceil(cols);
    let lon_step = opts.spacing_deg / opts.origin_lat.to_radians().cos();

    // Planted block placement comes first so that it does not depend on n_facilities.
    let block = if scenario == Scenario::PlantedHotspot {
        let side = ((cols.min(rows) as f64 * opts.hotspot_block_fraction).round() as usize).clamp(2, cols.min(rows));
        let r0 = below(&mut rng, rows - side + 1);
        let c0 = below(&mut rng, cols - side + 1);
        Some((r0, c0, side))
    } else {
        None
    };
    let delta = opts.hotspot_delta_sd * if opts.noise_sd > 0.0 { opts.noise_sd } else { 1.0 };

    let mut units = Vec::with_capacity(n_units);
    let mut members = Vec::new();
    let mut core = Vec::new();
    for i in 0..n_units {
        let (r, c) = (i / cols, i % cols);
        let jl = (unit_f64(&mut rng) * 2.0 - 1.0) * opts.jitter;
        let jo = (unit_f64(&mut rng) * 2.0 - 1.0) * opts.jitter;
        let lat = opts.origin_lat + (r as f64 + jl) * opts.spacing_deg;
        let lon = opts.origin_lon + (c as f64 + jo) * lon_step;
        let centroid = GeoPoint::new(lat, lon)?;
        let id = format!("U{i:05}");

        let features: Vec<f64> = COVARIATES.iter().map(|c| draw_covariate(&mut rng, c)).collect();
        let noise = normal(&mut rng) * opts.noise_sd;
        let drift = normal(&mut rng) * 0.5 * opts.noise_sd;

        let signal = match scenario {
            Scenario::LinearResponse => linear_signal(&features),
            Scenario::NonlinearResponse => nonlinear_signal(&features),
            Scenario::PlantedHotspot => {
                let mut s = HOTSPOT_BASE;
                if let Some((r0, c0, side)) = block {
                    let inside = |rr: usize, cc: usize| rr >= r0 && rr < r0 + side && cc >= c0 && cc < c0 + side;
                    if inside(r, c) {
                        s += delta;
                        members.push(id.clone());
                        if r > r0 && r + 1 < r0 + side && c > c0 && c + 1 < c0 + side {
                            core.push(id.clone());
                        }
                    }
                }
                s
            }
        };
        let rate = signal + noise;
        let clamp = |v: f64| v.clamp(0.0, 100.0);
        let (mut y1, mut y2) = if opts.noise_sd > 0.0 {
            (Some(clamp(rate + drift)), Some(clamp(rate - drift)))
        } else {
            (Some(clamp(rate)), Some(clamp(rate)))
        };

        let mut features: Vec<Option<f64>> = features.into_iter().map(Some).collect();
        for f in features.iter_mut() {
            if unit_f64(&mut rng) < opts.missing_fraction {
                *f = None;
            }
        }
        if unit_f64(&mut rng) < opts.ineligible_fraction {
            match below(&mut rng, 3) {
                0 => y1 = None,
                1 => y2 = None,
                _ => {
                    y1 = None;
                    y2 = None;
                }
            }
        }
        units.push(UnitRecord {
            id,
            centroid,
            rate_y1: y1,
            rate_y2: y2,
            features,
        });
    }

    let lat_span = rows as f64 * opts.spacing_deg;
    let lon_span = cols as f64 * lon_step;
    let facilities = (0..n_facilities)
        .map(|k| {
            let lat = opts.origin_lat - 0.5 * opts.spacing_deg + unit_f64(&mut rng) * lat_span;
            let lon = opts.origin_lon - 0.5 * lon_step + unit_f64(&mut rng) * lon_span;
            Ok(FacilityRecord {
                id: format!("F{k:05}"),
                location: GeoPoint::new(lat, lon)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let names = schema.names();
    let (intercept, coefficients) = match scenario {
        Scenario::LinearResponse => (
            LINEAR_INTERCEPT,
            LINEAR_TERMS.iter().map(|&(j, b)| (names[j].to_owned(), b)).collect(),
        ),
        Scenario::NonlinearResponse => (
            NONLINEAR_INTERCEPT,
            vec![
                (format!("xor({},{})", names[BLACK], names[HIGHER_ED]), XOR_WEIGHT),
                (format!("sin({})", names[POVERTY]), SINE_WEIGHT),
                (names[HOME_VALUE].to_owned(), HOME_WEIGHT),
            ],
        ),
        Scenario::PlantedHotspot => (HOTSPOT_BASE, Vec::new()),
    };
    let truth = GroundTruth {
        scenario,
        seed,
        grid_rows: rows,
        grid_cols: cols,
        intercept,
        coefficients,
        noise_sd: opts.noise_sd,
        hotspot: block.map(|_| PlantedBlock { members, core, delta }),
    };
    Ok((Dataset::new(schema, units)?, FacilitySet::new(facilities)?, truth))
}
