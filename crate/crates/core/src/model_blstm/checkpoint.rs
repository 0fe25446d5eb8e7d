use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::params::BlstmParams;
use super::train::TrainConfig;
use super::ModelError;
use crate::feature_registry::NormStats;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained network plus everything needed to apply it: the training
/// configuration, the normalization statistics and the hash of the feature
/// manifest the model was fitted on. Stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub manifest_hash: String,
    pub config: TrainConfig,
    pub class_weights: Vec<f64>,
    pub norm: Option<NormStats>,
    pub params: BlstmParams,
}

impl Checkpoint {
    pub fn new(
        manifest_hash: String,
        config: TrainConfig,
        class_weights: Vec<f64>,
        norm: Option<NormStats>,
        params: BlstmParams,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            manifest_hash,
            config,
            class_weights,
            norm,
            params,
        }
    }

    pub fn write<W: Write>(&self, dest: W) -> Result<(), ModelError> {
        serde_json::to_writer(dest, self)?;
        Ok(())
    }

    /// Reads a checkpoint and refuses it unless it was trained against
    /// `expected_manifest_hash`.
    pub fn read<R: Read>(source: R, expected_manifest_hash: &str) -> Result<Self, ModelError> {
        let ck: Checkpoint = serde_json::from_reader(source)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(ModelError::UnsupportedVersion(ck.version));
        }
        if ck.manifest_hash != expected_manifest_hash {
            return Err(ModelError::ManifestMismatch {
                expected: expected_manifest_hash.to_string(),
                found: ck.manifest_hash,
            });
        }
        let dims = ck.params.dims;
        dims.validate().map_err(ModelError::InvalidConfig)?;
        if ck.params.values.len() != dims.param_count() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} parameters stored, dimensions need {}",
                ck.params.values.len(),
                dims.param_count()
            )));
        }
        if !ck.params.is_finite() {
            return Err(ModelError::InvalidConfig(
                "checkpoint holds non-finite parameters".into(),
            ));
        }
        Ok(ck)
    }
}
