use serde::{Deserialize, Serialize};

use super::{FeatureManifest, FeatureMatrix, RegistryError};

/// Columns whose SD is at most this fraction of |mean| are treated as
/// constant.
pub const CONSTANT_REL_TOL: f64 = 1e-10;

/// Per-feature training mean and population SD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub manifest_hash: String,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub constant: Vec<bool>,
}

/// Column statistics over all epochs of all training matrices, skipping
/// missing entries. Columns with no observed values are constant with mean 0.
pub fn fit_normalization(train: &[&FeatureMatrix]) -> Result<NormStats, RegistryError> {
    let first = train.first().ok_or(RegistryError::EmptyTrainingSet)?;
    let manifest = &first.manifest;
    for m in train {
        if m.manifest != *manifest {
            return Err(RegistryError::ManifestMismatch(
                "training matrices use different manifests".into(),
            ));
        }
    }
    let k = manifest.len();
    let mut count = vec![0usize; k];
    let mut sum = vec![0.0; k];
    for m in train {
        for e in 0..m.n_epochs() {
            for j in 0..k {
                if !m.is_missing(e, j) {
                    count[j] += 1;
                    sum[j] += m.value(e, j);
                }
            }
        }
    }
    let mean: Vec<f64> = (0..k)
        .map(|j| if count[j] > 0 { sum[j] / count[j] as f64 } else { 0.0 })
        .collect();
    let mut ss = vec![0.0; k];
    for m in train {
        for e in 0..m.n_epochs() {
            for j in 0..k {
                if !m.is_missing(e, j) {
                    let d = m.value(e, j) - mean[j];
                    ss[j] += d * d;
                }
            }
        }
    }
    let sd: Vec<f64> = (0..k)
        .map(|j| {
            if count[j] > 0 {
                (ss[j] / count[j] as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let constant = (0..k)
        .map(|j| !(sd[j] > CONSTANT_REL_TOL * mean[j].abs()) || sd[j] == 0.0)
        .collect();
    Ok(NormStats {
        manifest_hash: manifest.hash(),
        mean,
        sd,
        constant,
    })
}

impl NormStats {
    fn check(&self, manifest: &FeatureManifest) -> Result<(), RegistryError> {
        if manifest.hash() != self.manifest_hash || manifest.len() != self.mean.len() {
            return Err(RegistryError::ManifestMismatch(format!(
                "statistics fitted for manifest {}, matrix uses {}",
                self.manifest_hash,
                manifest.hash()
            )));
        }
        Ok(())
    }

    /// `(x − mean) / sd`; constant columns and missing entries become 0.
    /// The result has no missing entries.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix, RegistryError> {
        self.check(&matrix.manifest)?;
        let k = matrix.n_features();
        let values = matrix
            .values
            .iter()
            .zip(&matrix.missing)
            .enumerate()
            .map(|(i, (&v, &miss))| {
                let j = i % k;
                if miss || self.constant[j] {
                    0.0
                } else {
                    (v - self.mean[j]) / self.sd[j]
                }
            })
            .collect();
        Ok(FeatureMatrix::from_parts(
            matrix.manifest.clone(),
            values,
            vec![false; matrix.missing.len()],
            matrix.labels.clone(),
        ))
    }

    /// Inverse of [`apply`](Self::apply) for observed, non-constant entries;
    /// constant columns map back to their mean.
    pub fn denormalize(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix, RegistryError> {
        self.check(&matrix.manifest)?;
        let k = matrix.n_features();
        let values = matrix
            .values
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let j = i % k;
                if self.constant[j] {
                    self.mean[j]
                } else {
                    z * self.sd[j] + self.mean[j]
                }
            })
            .collect();
        Ok(FeatureMatrix::from_parts(
            matrix.manifest.clone(),
            values,
            matrix.missing.clone(),
            matrix.labels.clone(),
        ))
    }
}
