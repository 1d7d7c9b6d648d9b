use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VALIDATION: &str = "validation.json";
pub const SUMMARY: &str = "summary.json";
pub const PREPARED_UNITS: &str = "prepared_units.csv";
pub const IMPUTATION: &str = "imputation.json";
pub const HOTSPOTS: &str = "hotspots.csv";
pub const HOTSPOTS_RATE_Y1: &str = "hotspots_rate_y1.csv";
pub const HOTSPOTS_RATE_Y2: &str = "hotspots_rate_y2.csv";
pub const HOTSPOT_SUMMARY: &str = "hotspots.json";
pub const CLASSES: &str = "classes.csv";
pub const JENKS: &str = "jenks.json";
pub const MAP: &str = "hotspots.geojson";
pub const SPLIT: &str = "split.json";
pub const CV_TABLE: &str = "cv_table.json";
pub const MODEL_RF: &str = "model_rf.json";
pub const MODEL_OLS: &str = "model_ols.json";
pub const MODEL_SVR: &str = "model_svr.json";
pub const COMPARISON: &str = "comparison.json";
pub const SHAP_IMPORTANCE: &str = "shap_importance.csv";
pub const EXPLANATION: &str = "explanation.json";
pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".lock";

pub fn scatter_name(feature: &str) -> String {
    format!("shap_scatter_{feature}.csv")
}

/// JSON artifact body tagged with the run identity.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_hash: String,
    pub seed: u64,
    #[serde(flatten)]
    pub body: T,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Output directory handle for one run.
pub struct OutDir {
    pub root: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

impl OutDir {
    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, body: T) -> anyhow::Result<()> {
        let env = Envelope { config_hash: self.config_hash.clone(), seed: self.seed, body };
        write_bytes(&self.path(name), &to_json_bytes(&env)?)
    }

    pub fn write_raw(&self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        write_bytes(&self.path(name), bytes)
    }

    /// Reads an upstream artifact, naming the stage that produces it when absent.
    pub fn require(&self, name: &str, producer: &str) -> anyhow::Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(anyhow!("{name} not found in {}: run stage `{producer}` first", self.root.display()))
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str, producer: &str) -> anyhow::Result<T> {
        let p = self.require(name, producer)?;
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        let env: Envelope<T> = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        if env.config_hash != self.config_hash {
            return Err(anyhow!(
                "{name} was produced under a different configuration: rerun stage `{producer}`"
            ));
        }
        Ok(env.body)
    }
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
    _file: File,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(LOCK);
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                anyhow!("{} is locked by another run (remove {} if that run is gone)", dir.display(), path.display())
            } else {
                anyhow!("creating {}: {e}", path.display())
            }
        })?;
        writeln!(file, "{}", std::process::id())?;
        Ok(Self { path, _file: file })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(DirLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(DirLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn envelope_round_trip_and_upstream_errors() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir { root: dir.path().to_owned(), config_hash: "abc".into(), seed: 9 };
        #[derive(Debug, PartialEq, Serialize, Deserialize)]
        struct Body {
            x: f64,
        }
        out.write_json("a.json", Body { x: 0.1 }).unwrap();
        let text = fs::read_to_string(out.path("a.json")).unwrap();
        assert!(text.contains("\"config_hash\": \"abc\"") && text.contains("\"seed\": 9"));
        assert_eq!(out.read_json::<Body>("a.json", "s").unwrap(), Body { x: 0.1 });
        let err = out.read_json::<Body>("b.json", "train").unwrap_err().to_string();
        assert!(err.contains("run stage `train` first"));
        let other = OutDir { config_hash: "zzz".into(), ..out };
        assert!(other.read_json::<Body>("a.json", "s").is_err());
    }
}
