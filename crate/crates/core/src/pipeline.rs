//! Configuration and per-subject glue between the stages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{CohortError, SleepThresholds};
use crate::epoching::{build_epoch_grid, EpochGrid, EpochingError, DEFAULT_EPOCH_LEN_S};
use crate::eval_report::EvalError;
use crate::feature_registry::{
    assemble_feature_matrix, FeatureInputs, FeatureManifest, FeatureMatrix, ManifestWindows, Profile, RegistryError,
};
use crate::model_blstm::{BlstmDims, ModelError, Sequence, TrainConfig};
use crate::preprocess::{clean_breathing, extract_rr, PreprocessError, RrSeries};
use crate::signal_io::{Hypnogram, SignalTrace, Stage, SubjectRecord};
use crate::synth_oracle::{SynthError, SynthProfile};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Epoching(#[from] EpochingError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub thresholds: SleepThresholds,
    /// Fraction of subjects assigned to training.
    pub train_ratio: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            thresholds: SleepThresholds::default(),
            train_ratio: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    pub bidirectional: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            layers: 2,
            bidirectional: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_epochs: usize,
    pub profile: SynthProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 30,
            n_epochs: 120,
            profile: SynthProfile::easy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub epoch_len_s: f64,
    pub profile: Profile,
    pub windows: ManifestWindows,
    pub cohort: CohortConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            epoch_len_s: DEFAULT_EPOCH_LEN_S,
            profile: Profile::Single,
            windows: ManifestWindows::default(),
            cohort: CohortConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.epoch_len_s > 0.0 && self.epoch_len_s.is_finite()) {
            return bad(format!("epoch_len_s must be positive, got {}", self.epoch_len_s));
        }
        if !(self.cohort.train_ratio > 0.0 && self.cohort.train_ratio < 1.0) {
            return bad(format!(
                "cohort.train_ratio must lie in (0, 1), got {}",
                self.cohort.train_ratio
            ));
        }
        let t = &self.cohort.thresholds;
        if !(0.0..=1.0).contains(&t.min_deep_fraction) || !(0.0..=1.0).contains(&t.min_rem_fraction) {
            return bad("sleep-architecture thresholds must lie in [0, 1]".into());
        }
        self.manifest()?;
        self.dims().validate().map_err(PipelineError::Config)?;
        self.train
            .validate(self.dims().classes)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.synth
            .profile
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn manifest(&self) -> Result<FeatureManifest, PipelineError> {
        FeatureManifest::build(self.profile, &self.windows).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn dims(&self) -> BlstmDims {
        BlstmDims {
            input: crate::feature_registry::MANIFEST_LEN,
            hidden: self.model.hidden,
            layers: self.model.layers,
            classes: Stage::COUNT,
            bidirectional: self.model.bidirectional,
        }
    }
}

/// RR series and cleaned breathing of one subject.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub rr: RrSeries,
    pub chest: SignalTrace,
    pub abdomen: Option<SignalTrace>,
}

impl Preprocessed {
    /// Duration covered by the breathing channels.
    pub fn span_s(&self) -> f64 {
        let mut span = self.chest.duration_s();
        if let Some(a) = &self.abdomen {
            span = span.min(a.duration_s());
        }
        span
    }
}

pub fn preprocess_record(record: &SubjectRecord) -> Result<Preprocessed, PipelineError> {
    Ok(Preprocessed {
        rr: extract_rr(&record.ecg)?,
        chest: clean_breathing(&record.breath_chest)?,
        abdomen: record.breath_abdomen.as_ref().map(clean_breathing).transpose()?,
    })
}

/// Epoch grid over `span_s`, shortened to the hypnogram when one is given.
pub fn epoch_grid(
    span_s: f64,
    epoch_len_s: f64,
    labels: Option<&Hypnogram<Stage>>,
) -> Result<EpochGrid, PipelineError> {
    let mut grid = build_epoch_grid(span_s, epoch_len_s)?;
    if let Some(h) = labels {
        grid.n_epochs = grid.n_epochs.min(h.len());
    }
    if grid.n_epochs == 0 {
        return Err(EpochingError::RecordingTooShort {
            duration_s: 0.0,
            epoch_len_s,
        }
        .into());
    }
    Ok(grid)
}

pub fn extract_features(
    manifest: &FeatureManifest,
    pre: &Preprocessed,
    epoch_len_s: f64,
    labels: Option<&Hypnogram<Stage>>,
) -> Result<FeatureMatrix, PipelineError> {
    let grid = epoch_grid(pre.span_s(), epoch_len_s, labels)?;
    let labels = labels.map(|h| &h.labels[..grid.n_epochs]);
    let inputs = FeatureInputs {
        grid: &grid,
        rr: &pre.rr,
        chest: &pre.chest,
        abdomen: pre.abdomen.as_ref(),
        labels,
    };
    Ok(assemble_feature_matrix(manifest, &inputs)?)
}

/// Preprocessing and feature extraction for one recording; labels come from
/// its hypnogram when present.
pub fn process_subject(
    record: &SubjectRecord,
    manifest: &FeatureManifest,
    epoch_len_s: f64,
) -> Result<FeatureMatrix, PipelineError> {
    let pre = preprocess_record(record)?;
    let labels = record.hypnogram.as_ref().map(|h| h.to_four_class());
    extract_features(manifest, &pre, epoch_len_s, labels.as_ref())
}

/// A (normalized) feature matrix as a model input sequence.
pub fn to_sequence(matrix: &FeatureMatrix) -> Sequence {
    Sequence {
        features: matrix.values.clone(),
        labels: matrix.labels.iter().map(|l| l.map(Stage::index)).collect(),
    }
}
