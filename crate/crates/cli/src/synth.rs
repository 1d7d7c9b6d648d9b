//! `synth` subcommand: writes a synthetic input set with its ground truth.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use tractlens_core::ingest::{write_facilities, write_units};
use tractlens_core::ingest::synth::{synth_generate_with, Scenario, SynthOptions};

use crate::artifacts::{to_json_bytes, write_bytes};
use crate::config::RunConfig;

pub const UNITS: &str = "units.csv";
pub const FACILITIES: &str = "facilities.csv";
pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const CONFIG: &str = "config.json";

/// Writes units, facilities and ground truth into `dir`, plus a config that
/// points at them (relative paths) with the given seed.
pub fn write_synth(
    dir: &Path,
    n_units: usize,
    n_facilities: usize,
    seed: u64,
    scenario: Scenario,
    opts: &SynthOptions,
) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (units, facilities, truth) = synth_generate_with(n_units, n_facilities, seed, scenario, opts)?;
    write_units(&units, BufWriter::new(File::create(dir.join(UNITS))?))?;
    write_facilities(&facilities, BufWriter::new(File::create(dir.join(FACILITIES))?))?;
    write_bytes(&dir.join(GROUND_TRUTH), &to_json_bytes(&truth)?)?;
    let mut cfg = RunConfig::with_inputs(UNITS.into(), FACILITIES.into());
    cfg.seed = seed;
    cfg.output_dir = "out".into();
    write_bytes(&dir.join(CONFIG), &to_json_bytes(&cfg)?)?;
    Ok(())
}
