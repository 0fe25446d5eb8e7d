//! The 152-column feature manifest, per-epoch assembly and Z-scoring.

mod assemble;
mod manifest;
mod normalize;

pub use assemble::{assemble_feature_matrix, FeatureInputs, MAX_MISSING_FRACTION};
pub use manifest::{FeatureManifest, ManifestEntry, ManifestWindows, Profile, Source, MANIFEST_LEN};
pub use normalize::{fit_normalization, NormStats, CONSTANT_REL_TOL};

use thiserror::Error;

use crate::signal_io::Stage;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("subject unusable: {missing} of {total} feature entries are missing")]
    SubjectUnusable { missing: usize, total: usize },
    #[error("normalization needs at least one training matrix")]
    EmptyTrainingSet,
    #[error("feature manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("profile requires the {0} channel")]
    MissingChannel(String),
    #[error("{0} labels for {1} epochs")]
    LabelLength(usize, usize),
}

/// Epoch-by-feature values in row-major order. Missing entries hold NaN and
/// are flagged in `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub manifest: FeatureManifest,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
    pub labels: Vec<Option<Stage>>,
}

impl FeatureMatrix {
    /// Panics if the buffers do not have `labels.len() × manifest.len()`
    /// entries.
    pub fn from_parts(
        manifest: FeatureManifest,
        values: Vec<f64>,
        missing: Vec<bool>,
        labels: Vec<Option<Stage>>,
    ) -> Self {
        let n = labels.len() * manifest.len();
        assert_eq!(values.len(), n, "value buffer size");
        assert_eq!(missing.len(), n, "missing-mask size");
        Self {
            manifest,
            values,
            missing,
            labels,
        }
    }

    pub fn n_epochs(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.manifest.len()
    }

    pub fn value(&self, epoch: usize, feature: usize) -> f64 {
        self.values[epoch * self.n_features() + feature]
    }

    pub fn is_missing(&self, epoch: usize, feature: usize) -> bool {
        self.missing[epoch * self.n_features() + feature]
    }

    pub fn row(&self, epoch: usize) -> &[f64] {
        let k = self.n_features();
        &self.values[epoch * k..(epoch + 1) * k]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    /// All labels, if every epoch has one.
    pub fn complete_labels(&self) -> Option<Vec<Stage>> {
        self.labels.iter().copied().collect()
    }
}
