//! Features computed from RR intervals.
//!
//! Every extractor returns a fixed-length array aligned with its `*_NAMES`
//! constant. `None` marks a value that is undefined on the given window
//! (e.g. a moment of a constant series); `Err(InsufficientData)` means the
//! whole group is unavailable.

mod freq;
mod nonlinear;
mod novel;
mod time;

pub use freq::{resample_rr, rr_freq_features, FREQ_NAMES, RR_RESAMPLE_HZ};
pub use nonlinear::{nonlinear_features, sample_entropy, NONLINEAR_NAMES, SAMPEN_MIN_LEN};
pub use novel::{novel_f1, novel_f2, novel_f3, RrWindowStats, NOVEL_NAMES};
pub use time::{hrv_time_features, statistical_features, HRV_NAMES, STAT_NAMES};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("insufficient data: need {needed}, have {have}")]
    InsufficientData { needed: String, have: String },
    #[error("the window's center epoch has no usable intervals")]
    MissingCenter,
    #[error("no epoch in the window has usable intervals")]
    NoValidEpochs,
}

pub(crate) fn need_count(have: usize, needed: usize) -> Result<(), FeatureError> {
    if have < needed {
        Err(FeatureError::InsufficientData {
            needed: format!("{needed} intervals"),
            have: format!("{have}"),
        })
    } else {
        Ok(())
    }
}

pub(crate) fn successive_diffs(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}
