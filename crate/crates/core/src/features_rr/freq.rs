//! Frequency-domain HRV: RR values interpolated onto a uniform 4 Hz grid,
//! mean-removed, Hann-windowed and Fourier transformed.

use super::FeatureError;
use crate::spectrum::{periodogram, PowerSpectrum};

pub const RR_RESAMPLE_HZ: f64 = 4.0;
pub const MIN_COVERAGE_S: f64 = 30.0;

pub const VLF: (f64, f64) = (0.003, 0.04);
pub const LF: (f64, f64) = (0.04, 0.15);
pub const HF: (f64, f64) = (0.15, 0.4);
const VHF: (f64, f64) = (0.4, 1.0);

/// Spectra with less total power than this (s²) are treated as empty.
pub const ZERO_POWER: f64 = 1e-14;

pub const FREQ_NAMES: [&str; 21] = [
    "total_power",
    "vlf_power",
    "lf_power",
    "hf_power",
    "lf_hf_ratio",
    "lf_norm",
    "hf_norm",
    "vlf_peak_freq",
    "vlf_peak_power",
    "lf_peak_freq",
    "lf_peak_power",
    "hf_peak_freq",
    "hf_peak_power",
    "spectral_entropy",
    "spectral_centroid",
    "spectral_edge_95",
    "median_freq",
    "lf_total_ratio",
    "hf_total_ratio",
    "power_0p4_1hz",
    "spectral_flatness",
];

/// Linear interpolation of `(times, values)` at `rate_hz` from the first to
/// the last time stamp (inclusive when it falls on the grid).
pub fn resample_rr(times: &[f64], values: &[f64], rate_hz: f64) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    if times.is_empty() {
        return Vec::new();
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let n = (span * rate_hz).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = t0 + k as f64 / rate_hz;
        while seg + 2 < times.len() && times[seg + 1] <= t {
            seg += 1;
        }
        if times.len() == 1 {
            out.push(values[0]);
            continue;
        }
        let (ta, tb) = (times[seg], times[seg + 1]);
        let frac = if tb > ta {
            ((t - ta) / (tb - ta)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(values[seg] + frac * (values[seg + 1] - values[seg]));
    }
    out
}

fn cumulative_frequency(spec: &PowerSpectrum, fraction: f64, total: f64) -> f64 {
    let mut acc = 0.0;
    for (f, p) in spec.freqs_hz.iter().zip(&spec.power) {
        acc += p;
        if acc >= fraction * total {
            return *f;
        }
    }
    *spec.freqs_hz.last().unwrap_or(&0.0)
}

/// The 21 spectral features of an RR window, aligned with [`FREQ_NAMES`].
/// `times`/`values` are the usable intervals of the window in time order.
pub fn rr_freq_features(times: &[f64], values: &[f64]) -> Result<[Option<f64>; 21], FeatureError> {
    let coverage = match (times.first(), times.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    if coverage < MIN_COVERAGE_S {
        return Err(FeatureError::InsufficientData {
            needed: format!("{MIN_COVERAGE_S} s of RR coverage"),
            have: format!("{coverage:.1} s"),
        });
    }
    let resampled = resample_rr(times, values, RR_RESAMPLE_HZ);
    let spec = periodogram(&resampled, RR_RESAMPLE_HZ);
    Ok(spectral_summary(&spec))
}

fn spectral_summary(spec: &PowerSpectrum) -> [Option<f64>; 21] {
    let total = spec.total();
    let vlf = spec.band_power(VLF.0, VLF.1);
    let lf = spec.band_power(LF.0, LF.1);
    let hf = spec.band_power(HF.0, HF.1);
    let vhf = spec.band_power(VHF.0, VHF.1);
    let has_power = total > ZERO_POWER;
    let ratio = |num: f64, den: f64| (has_power && den > ZERO_POWER).then(|| num / den);
    let peak = |band: (f64, f64)| {
        if !has_power {
            return (None, None);
        }
        match spec.peak_in(band.0, band.1) {
            Some((f, p)) => (Some(f), Some(p)),
            None => (None, None),
        }
    };
    let (vlf_f, vlf_p) = peak(VLF);
    let (lf_f, lf_p) = peak(LF);
    let (hf_f, hf_p) = peak(HF);

    let (entropy, centroid, edge, median, flatness) = if has_power {
        let k = spec.power.len() as f64;
        let h: f64 = spec
            .power
            .iter()
            .map(|p| p / total)
            .filter(|q| *q > 0.0)
            .map(|q| -q * q.ln())
            .sum();
        let centroid: f64 = spec.freqs_hz.iter().zip(&spec.power).map(|(f, p)| f * p).sum::<f64>() / total;
        // DC carries no information after mean removal; leave it out.
        let ac = &spec.power[1.min(spec.power.len())..];
        let flatness = if ac.is_empty() || ac.iter().any(|p| *p <= 0.0) {
            0.0
        } else {
            let log_mean = ac.iter().map(|p| p.ln()).sum::<f64>() / ac.len() as f64;
            log_mean.exp() / (ac.iter().sum::<f64>() / ac.len() as f64)
        };
        (
            Some(if k > 1.0 { h / k.ln() } else { 0.0 }),
            Some(centroid),
            Some(cumulative_frequency(spec, 0.95, total)),
            Some(cumulative_frequency(spec, 0.5, total)),
            Some(flatness),
        )
    } else {
        (None, None, None, None, None)
    };

    [
        Some(total),
        Some(vlf),
        Some(lf),
        Some(hf),
        ratio(lf, hf),
        ratio(lf, lf + hf),
        ratio(hf, lf + hf),
        vlf_f,
        vlf_p,
        lf_f,
        lf_p,
        hf_f,
        hf_p,
        entropy,
        centroid,
        edge,
        median,
        ratio(lf, total),
        ratio(hf, total),
        Some(vhf),
        flatness,
    ]
}
