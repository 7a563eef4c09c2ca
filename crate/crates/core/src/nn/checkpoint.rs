use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec, NnError, TrainConfig};
use crate::io::{hex_f64, write_atomic, HexMap, HexVec};

pub const CHECKPOINT_FORMAT: &str = "mimicarm.model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub steps: u64,
    #[serde(with = "hex_f64")]
    pub final_loss: f64,
    pub config: TrainConfig,
}

/// A model plus training metadata and named auxiliary vectors (normalization
/// statistics, envelopes), stored as JSON with bit-exact hex reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub params: HexVec,
    pub meta: TrainingMeta,
    #[serde(default)]
    pub extras: HexMap,
}

impl Checkpoint {
    pub fn new(model: &Model, meta: TrainingMeta) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            spec: model.spec().clone(),
            params: HexVec(model.params().to_vec()),
            meta,
            extras: HexMap::new(),
        }
    }

    pub fn with_extra(mut self, name: &str, values: Vec<f64>) -> Self {
        self.extras.insert(name.into(), HexVec(values));
        self
    }

    pub fn extra(&self, name: &str) -> Result<&[f64], NnError> {
        self.extras
            .get(name)
            .map(|v| v.0.as_slice())
            .ok_or_else(|| NnError::Checkpoint(format!("missing extra {name:?}")))
    }

    pub fn model(&self) -> Result<Model, NnError> {
        Model::from_params(self.spec.clone(), self.params.0.clone())
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let bytes = serde_json::to_vec_pretty(self)?;
        write_atomic(path, &bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let bytes = std::fs::read(path)?;
        let ck: Checkpoint = serde_json::from_slice(&bytes)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(NnError::Checkpoint(format!("unexpected format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        ck.spec.validate()?;
        if ck.params.0.len() != ck.spec.param_count() {
            return Err(NnError::ParamCount {
                expected: ck.spec.param_count(),
                got: ck.params.0.len(),
            });
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = Model::new(ModelSpec::stacked(3, &[4], &[5], 2, 7).unwrap()).unwrap();
        let meta = TrainingMeta {
            steps: 12,
            final_loss: 0.1 + 0.2,
            config: TrainConfig::default(),
        };
        let ck = Checkpoint::new(&m, meta).with_extra("mean", vec![1.0 / 3.0, -0.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.model().unwrap(), m);
        assert_eq!(back.extra("mean").unwrap()[0].to_bits(), (1.0f64 / 3.0).to_bits());
        assert!(back.extra("scale").is_err());
    }

    #[test]
    fn rejects_wrong_format_and_param_count() {
        let m = Model::new(ModelSpec::stacked(2, &[], &[], 1, 0).unwrap()).unwrap();
        let meta = TrainingMeta {
            steps: 0,
            final_loss: 0.0,
            config: TrainConfig::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut ck = Checkpoint::new(&m, meta.clone());
        ck.format = "other".into();
        ck.save(&path).unwrap();
        assert!(Checkpoint::load(&path).is_err());
        let mut ck = Checkpoint::new(&m, meta);
        ck.params.0.push(1.0);
        ck.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(NnError::ParamCount { .. })));
    }
}
