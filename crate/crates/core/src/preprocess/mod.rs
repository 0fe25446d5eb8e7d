//! ECG → RR intervals; respiration → baseline-free, low-passed breathing.

pub mod filter;
mod rpeak;
mod rr;
pub mod wavelet;

pub use rpeak::{bandpass as qrs_bandpass, detect_r_peaks, REFRACTORY_S};
pub use rr::{rr_from_peaks, RrSeries, MAX_REPAIR_RUN, RR_MAX_S, RR_MIN_S};

use thiserror::Error;

use crate::signal_io::SignalTrace;
use filter::{BandType, Sos};

pub const BREATH_LOWPASS_HZ: f64 = 1.0;
pub const BUTTERWORTH_ORDER: usize = 4;
pub const MIN_BASELINE_DURATION_S: f64 = 60.0;
/// Upper edge of the approximation band the wavelet depth must reach.
const BASELINE_BAND_HZ: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("signal too short: need {needed_s} s, got {got_s:.2} s")]
    SignalTooShort { needed_s: f64, got_s: f64 },
    #[error("sampling rate {rate_hz} Hz below the required {min_hz} Hz")]
    SampleRateTooLow { rate_hz: f64, min_hz: f64 },
    #[error("flat signal: no detectable R-peaks")]
    FlatSignal,
    #[error("cutoff {cutoff_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("{0} R-peaks; at least 2 are needed for an RR series")]
    TooFewPeaks(usize),
    #[error("peak indices must be strictly increasing")]
    UnorderedPeaks,
}

/// Decomposition depth whose approximation band lies below 0.05 Hz:
/// `ceil(log2(rate / 0.1))`.
pub fn baseline_depth(sample_rate_hz: f64) -> u32 {
    (sample_rate_hz / (2.0 * BASELINE_BAND_HZ)).log2().ceil().max(1.0) as u32
}

/// Subtract the deepest-level Daubechies-4 approximation, removing offset
/// and slow drift.
pub fn remove_baseline_wavelet(breath: &SignalTrace) -> Result<SignalTrace, PreprocessError> {
    if breath.duration_s() < MIN_BASELINE_DURATION_S {
        return Err(PreprocessError::SignalTooShort {
            needed_s: MIN_BASELINE_DURATION_S,
            got_s: breath.duration_s(),
        });
    }
    let depth = baseline_depth(breath.sample_rate_hz);
    let approx = wavelet::approximation(&breath.samples, depth);
    let cleaned = breath.samples.iter().zip(&approx).map(|(x, a)| x - a).collect();
    Ok(breath.with_samples(cleaned))
}

/// Zero-phase 4th-order Butterworth low-pass.
pub fn butterworth_lowpass(trace: &SignalTrace, cutoff_hz: f64) -> Result<SignalTrace, PreprocessError> {
    let nyquist_hz = trace.sample_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
        return Err(PreprocessError::CutoffAboveNyquist { cutoff_hz, nyquist_hz });
    }
    let sos = Sos::butterworth(BUTTERWORTH_ORDER, cutoff_hz, trace.sample_rate_hz, BandType::LowPass);
    let pad = filter::default_pad(cutoff_hz, trace.sample_rate_hz);
    Ok(trace.with_samples(sos.filtfilt(&trace.samples, pad)))
}

/// Baseline removal followed by the 1 Hz low-pass.
pub fn clean_breathing(breath: &SignalTrace) -> Result<SignalTrace, PreprocessError> {
    butterworth_lowpass(&remove_baseline_wavelet(breath)?, BREATH_LOWPASS_HZ)
}

/// R-peak detection followed by RR construction.
pub fn extract_rr(ecg: &SignalTrace) -> Result<RrSeries, PreprocessError> {
    let peaks = detect_r_peaks(ecg)?;
    let mut rr = rr_from_peaks(&peaks, ecg.sample_rate_hz)?;
    if ecg.start_time_s != 0.0 {
        for t in &mut rr.peak_times_s {
            *t += ecg.start_time_s;
        }
    }
    Ok(rr)
}
