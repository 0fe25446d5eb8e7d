//! Readers and writers for recordings and the project's interchange formats.

mod edf;
mod hypnogram;
mod matrix_csv;
mod metadata;
mod series_csv;

pub use edf::{read_edf, write_edf, EdfError};
pub use hypnogram::{
    read_hypnogram, write_hypnogram, AnyHypnogram, Hypnogram, HypnogramError, Scheme, SixStage, Stage, StageLabel,
};
pub use matrix_csv::{read_feature_matrix, write_feature_matrix, MatrixIoError};
pub use metadata::{read_subject_metadata, write_subject_metadata, MetadataError, SubjectMeta};
pub use series_csv::{read_rr_csv, read_trace_csv, write_rr_csv, write_trace_csv, SeriesIoError};

use serde::{Deserialize, Serialize};

/// Default ECG sampling rate of the wearable recorder.
pub const DEFAULT_ECG_RATE_HZ: f64 = 200.0;
/// Default sampling rate of the chest/abdomen respiration belts.
pub const DEFAULT_RESP_RATE_HZ: f64 = 25.0;

/// A uniformly sampled channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    pub channel_label: String,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
    /// Seconds from the start of the recording to the first sample.
    pub start_time_s: f64,
}

impl SignalTrace {
    pub fn new(channel_label: impl Into<String>, sample_rate_hz: f64, samples: Vec<f64>) -> Self {
        Self {
            channel_label: channel_label.into(),
            sample_rate_hz,
            samples,
            start_time_s: 0.0,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time in seconds (from recording start) of sample `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        self.start_time_s + i as f64 / self.sample_rate_hz
    }

    /// Same channel metadata, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            channel_label: self.channel_label.clone(),
            sample_rate_hz: self.sample_rate_hz,
            samples,
            start_time_s: self.start_time_s,
        }
    }
}

/// One subject-night: ECG, respiration and optional scoring metadata.
#[derive(Debug, Clone)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub ecg: SignalTrace,
    pub breath_chest: SignalTrace,
    pub breath_abdomen: Option<SignalTrace>,
    pub hypnogram: Option<AnyHypnogram>,
    pub ahi: Option<f64>,
}

impl SubjectRecord {
    /// Duration of the shortest channel.
    pub fn span_s(&self) -> f64 {
        let mut span = self.ecg.duration_s().min(self.breath_chest.duration_s());
        if let Some(abd) = &self.breath_abdomen {
            span = span.min(abd.duration_s());
        }
        span
    }
}
