//! Breathing-signal statistics and cardiopulmonary coupling (CPC).

mod breath;
mod cpc;

pub use breath::{breath_features, detect_breaths, Breaths, BREATH_NAMES, MIN_BREATH_SPACING_S};
pub use cpc::{
    cpc_band_features, cpc_from_series, cpc_spectrum, CpcSpectrum, CPC_NAMES, CPC_RATE_HZ, CPC_SEGMENTS,
    MIN_SEGMENT_LEN,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RespFeatureError {
    #[error("fewer than 2 breathing peaks in the window")]
    NoBreathsDetected,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
