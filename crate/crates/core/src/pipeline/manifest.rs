use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig, Seeds};
use crate::io::{file_digest, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Paths relative to the output directory (or else the config's
    /// directory) to sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
    }

    /// Loads the run's manifest (or starts one) and records `stage`,
    /// digesting every listed file. Written atomically.
    pub fn record(cfg: &RunConfig, stage: &str, inputs: &[std::path::PathBuf], outputs: &[std::path::PathBuf], seconds: f64) -> Result<Self, PipelineError> {
        let out = cfg.out();
        let path = out.join(MANIFEST_FILE);
        let mut m = if path.exists() {
            Self::load(&path)?
        } else {
            RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                config_sha256: String::new(),
                seeds: cfg.seeds.clone(),
                stages: BTreeMap::new(),
            }
        };
        m.tool_version = env!("CARGO_PKG_VERSION").into();
        m.config_sha256 = cfg.digest()?;
        m.seeds = cfg.seeds.clone();
        let digest = |files: &[std::path::PathBuf]| -> Result<BTreeMap<String, String>, PipelineError> {
            files
                .iter()
                .map(|p| {
                    let rel = p.strip_prefix(&out).or_else(|_| p.strip_prefix(&cfg.base_dir)).unwrap_or(p);
                    let key = rel.to_string_lossy().into_owned();
                    Ok((key, file_digest(p)?))
                })
                .collect()
        };
        m.stages.insert(
            stage.into(),
            StageRecord {
                inputs: digest(inputs)?,
                outputs: digest(outputs)?,
                wall_clock_s: seconds,
            },
        );
        let bytes = serde_json::to_vec_pretty(&m)?;
        write_atomic(&path, &bytes)?;
        Ok(m)
    }
}
