use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tractlens_core::explain::{DEFAULT_BACKGROUND_SIZE, DEFAULT_TOP_THRESHOLD};
use tractlens_core::impute::DEFAULT_K;
use tractlens_core::ingest::{FeatureSpec, Schema};
use tractlens_core::models::{ForestGrid, SvrParams};
use tractlens_core::spatial_stats::{DEFAULT_JENKS_K, DEFAULT_WEIGHTS_K};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsScheme {
    Knn,
    DistanceBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HotspotConfig {
    pub weights: WeightsScheme,
    pub k: usize,
    pub distance_miles: f64,
    /// Classify on Benjamini-Hochberg adjusted p-values instead of raw z.
    pub fdr: bool,
}

impl Default for HotspotConfig {
    fn default() -> Self {
        Self { weights: WeightsScheme::Knn, k: DEFAULT_WEIGHTS_K, distance_miles: 10.0, fdr: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub train_fraction: f64,
    pub folds: usize,
    pub grid: ForestGrid,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    pub svr_epochs: usize,
    pub svr_eta0: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let svr = SvrParams::default();
        Self {
            train_fraction: 0.75,
            folds: 5,
            grid: ForestGrid::default(),
            min_leaf: 5,
            max_depth: None,
            svr_c: svr.c,
            svr_epsilon: svr.epsilon,
            svr_epochs: svr.epochs,
            svr_eta0: svr.eta0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainOn {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapConfig {
    pub background_size: usize,
    pub threshold: f64,
    pub explain_on: ExplainOn,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self { background_size: DEFAULT_BACKGROUND_SIZE, threshold: DEFAULT_TOP_THRESHOLD, explain_on: ExplainOn::Test }
    }
}

/// One run of the pipeline. Relative paths resolve against the directory of
/// the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub units: PathBuf,
    pub facilities: PathBuf,
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses every core. Does not affect any output.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Base covariates read from the units file. The two accessibility
    /// features are always appended.
    #[serde(default = "default_schema")]
    pub schema: Vec<FeatureSpec>,
    #[serde(default = "default_impute_k")]
    pub impute_k: usize,
    #[serde(default)]
    pub hotspot: HotspotConfig,
    #[serde(default = "default_jenks_k")]
    pub jenks_k: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub shap: ShapConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("tractlens-out")
}

fn default_schema() -> Vec<FeatureSpec> {
    Schema::default_base().features().to_vec()
}

fn default_impute_k() -> usize {
    DEFAULT_K
}

fn default_jenks_k() -> usize {
    DEFAULT_JENKS_K
}

impl RunConfig {
    /// Minimal config for the given inputs, everything else at defaults.
    pub fn with_inputs(units: PathBuf, facilities: PathBuf) -> Self {
        serde_json::from_value(serde_json::json!({ "units": units, "facilities": facilities }))
            .expect("defaults deserialize")
    }

    /// Reads a config file and applies `key.path=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(CliError::config)?;
        let mut value: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(CliError::config)?;
        for o in overrides {
            apply_override(&mut value, o).map_err(CliError::config)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(value)
            .with_context(|| format!("invalid config {}", path.display()))
            .map_err(CliError::config)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.units);
        fix(&mut self.facilities);
        fix(&mut self.output_dir);
        if let Some(g) = self.geometry.as_mut() {
            fix(g);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for p in [Some(&self.units), Some(&self.facilities), self.geometry.as_ref()].into_iter().flatten() {
            if !p.is_file() {
                bail!("input file {} does not exist", p.display());
            }
        }
        self.base_schema()?;
        if self.impute_k == 0 || self.jenks_k == 0 {
            bail!("impute_k and jenks_k must be positive");
        }
        if self.threads == Some(0) {
            bail!("threads must be positive");
        }
        let m = &self.model;
        if !(m.train_fraction > 0.0 && m.train_fraction < 1.0) {
            bail!("model.train_fraction must lie in (0, 1)");
        }
        if m.folds < 2 || m.grid.cells().is_empty() || m.min_leaf == 0 {
            bail!("model needs folds >= 2, a non-empty grid and min_leaf >= 1");
        }
        if !(self.shap.threshold >= 0.0) || self.shap.background_size == 0 {
            bail!("shap.threshold must be >= 0 and shap.background_size positive");
        }
        Ok(())
    }

    pub fn base_schema(&self) -> anyhow::Result<Schema> {
        Ok(Schema::new(self.schema.clone())?)
    }

    /// Base schema plus the accessibility features.
    pub fn full_schema(&self) -> anyhow::Result<Schema> {
        let mut specs = self.schema.clone();
        specs.extend(Schema::accessibility_features());
        Ok(Schema::new(specs)?)
    }

    pub fn svr_params(&self, seed: u64) -> SvrParams {
        SvrParams {
            c: self.model.svr_c,
            epsilon: self.model.svr_epsilon,
            epochs: self.model.svr_epochs,
            eta0: self.model.svr_eta0,
            seed,
        }
    }

    /// SHA-256 of the config with `threads` and `output_dir` removed; neither
    /// affects results.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("threads");
            map.remove("output_dir");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> anyhow::Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| anyhow!("override `{spec}` is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override path `{path}` has an empty segment");
    }
    let mut node = root;
    for k in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| anyhow!("override path `{path}` crosses a non-object"))?;
        node = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| anyhow!("override path `{path}` crosses a non-object"))?;
    obj.insert(keys[keys.len() - 1].to_owned(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_parse_json_or_fall_back_to_string() {
        let mut v = json!({ "model": { "folds": 5 } });
        apply_override(&mut v, "model.folds=3").unwrap();
        apply_override(&mut v, "model.grid.mtry=[1,2]").unwrap();
        apply_override(&mut v, "output_dir=out/run 1").unwrap();
        assert_eq!(v, json!({ "model": { "folds": 3, "grid": { "mtry": [1, 2] } }, "output_dir": "out/run 1" }));
        assert!(apply_override(&mut v, "no_equals").is_err());
        assert!(apply_override(&mut v, "output_dir.x=1").is_err());
        assert!(apply_override(&mut v, "a..b=1").is_err());
    }

    #[test]
    fn hash_ignores_threads_and_output_dir() {
        let a = RunConfig::with_inputs("u.csv".into(), "f.csv".into());
        let mut b = a.clone();
        b.threads = Some(3);
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn defaults_round_trip() {
        let a = RunConfig::with_inputs("u.csv".into(), "f.csv".into());
        assert_eq!(a.impute_k, 20);
        assert_eq!(a.model.train_fraction, 0.75);
        assert_eq!(a.shap.threshold, 0.3);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, back);
        assert!(serde_json::from_value::<RunConfig>(json!({"units": "u", "facilities": "f", "typo": 1})).is_err());
    }
}
