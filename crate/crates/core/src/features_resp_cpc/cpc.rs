//! Cardiopulmonary coupling: cross-spectral power between RR variability and
//! breathing, weighted by their squared coherence.

use super::RespFeatureError;
use crate::spectrum::welch_cross;
use crate::stats;

pub const CPC_RATE_HZ: f64 = 4.0;
pub const CPC_SEGMENTS: usize = 8;
/// Shortest Welch segment; fewer segments are used before going below it.
pub const MIN_SEGMENT_LEN: usize = 32;
pub const CPC_MAX_FREQ_HZ: f64 = 0.5;

pub const CPC_NAMES: [&str; 6] = [
    "cpc_vlf_sum",
    "cpc_lf_sum",
    "cpc_hf_sum",
    "cpc_vlf_ratio",
    "cpc_lf_ratio",
    "cpc_hf_ratio",
];

const VLF: (f64, f64) = (0.0, 0.01);
const LF: (f64, f64) = (0.01, 0.1);
const HF: (f64, f64) = (0.1, 0.4);

#[derive(Debug, Clone, PartialEq)]
pub struct CpcSpectrum {
    pub freqs_hz: Vec<f64>,
    pub coherence: Vec<f64>,
    pub cpc_index: Vec<f64>,
}

impl CpcSpectrum {
    pub fn total(&self) -> f64 {
        self.cpc_index.iter().sum()
    }

    /// Sum over bins in `[lo, hi)`.
    pub fn band_sum(&self, lo: f64, hi: f64) -> f64 {
        self.freqs_hz
            .iter()
            .zip(&self.cpc_index)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, c)| c)
            .sum()
    }
}

fn unit_variance(x: &[f64]) -> Vec<f64> {
    let m = stats::mean(x);
    let sd = stats::std_dev(x);
    let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
    x.iter().map(|v| (v - m) * scale).collect()
}

/// CPC of two equally sampled series. Both are scaled to unit variance
/// first, so the result does not depend on input gain.
pub fn cpc_from_series(x: &[f64], y: &[f64], rate_hz: f64) -> Result<CpcSpectrum, RespFeatureError> {
    if x.len() != y.len() {
        return Err(RespFeatureError::LengthMismatch(x.len(), y.len()));
    }
    let (x, y) = (unit_variance(x), unit_variance(y));
    let spectra = (2..=CPC_SEGMENTS)
        .rev()
        .find_map(|k| welch_cross(&x, &y, rate_hz, k, MIN_SEGMENT_LEN))
        .ok_or_else(|| {
            RespFeatureError::InsufficientData(format!(
                "{} samples do not give 2 segments of {MIN_SEGMENT_LEN}",
                x.len()
            ))
        })?;
    let mut out = CpcSpectrum {
        freqs_hz: Vec::new(),
        coherence: Vec::new(),
        cpc_index: Vec::new(),
    };
    for k in 0..spectra.freqs_hz.len() {
        if spectra.freqs_hz[k] > CPC_MAX_FREQ_HZ + 1e-12 {
            break;
        }
        let cross = spectra.pxy[k].norm_sqr();
        let denom = spectra.pxx[k] * spectra.pyy[k];
        let coh = if denom > 0.0 {
            (cross / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        debug_assert!((0.0..=1.0).contains(&coh));
        out.freqs_hz.push(spectra.freqs_hz[k]);
        out.coherence.push(coh);
        out.cpc_index.push(cross * coh);
    }
    Ok(out)
}

/// CPC over the time span `[start_s, end_s)`: the RR intervals
/// (`rr_times`, `rr_values`) and the breathing samples are both brought
/// onto a common 4 Hz grid by linear interpolation.
pub fn cpc_spectrum(
    rr_times: &[f64],
    rr_values: &[f64],
    breath: &[f64],
    breath_rate_hz: f64,
    breath_start_s: f64,
    span: (f64, f64),
) -> Result<CpcSpectrum, RespFeatureError> {
    if rr_times.len() != rr_values.len() {
        return Err(RespFeatureError::LengthMismatch(rr_times.len(), rr_values.len()));
    }
    if rr_times.len() < 2 || breath.len() < 2 {
        return Err(RespFeatureError::InsufficientData(
            "need at least 2 RR intervals and 2 breathing samples".into(),
        ));
    }
    let n = ((span.1 - span.0) * CPC_RATE_HZ).floor() as usize;
    let grid: Vec<f64> = (0..n).map(|k| span.0 + k as f64 / CPC_RATE_HZ).collect();
    let rr = interpolate(rr_times, rr_values, &grid);
    let breath_times: Vec<f64> = (0..breath.len())
        .map(|i| breath_start_s + i as f64 / breath_rate_hz)
        .collect();
    let resp = interpolate(&breath_times, breath, &grid);
    cpc_from_series(&rr, &resp, CPC_RATE_HZ)
}

/// Piecewise-linear interpolation, held constant beyond the end knots.
fn interpolate(times: &[f64], values: &[f64], at: &[f64]) -> Vec<f64> {
    let last = times.len() - 1;
    at.iter()
        .map(|&t| {
            if t <= times[0] {
                return values[0];
            }
            if t >= times[last] {
                return values[last];
            }
            let j = times.partition_point(|&s| s <= t) - 1;
            let frac = (t - times[j]) / (times[j + 1] - times[j]);
            values[j] + frac * (values[j + 1] - values[j])
        })
        .collect()
}

/// Band sums and their ratios to the whole-spectrum total, aligned with
/// [`CPC_NAMES`]. Ratios are `None` for an all-zero spectrum.
pub fn cpc_band_features(spectrum: &CpcSpectrum) -> [Option<f64>; 6] {
    let total = spectrum.total();
    let sums = [
        spectrum.band_sum(VLF.0, VLF.1),
        spectrum.band_sum(LF.0, LF.1),
        spectrum.band_sum(HF.0, HF.1),
    ];
    let ratio = |s: f64| (total > 0.0).then(|| s / total);
    [
        Some(sums[0]),
        Some(sums[1]),
        Some(sums[2]),
        ratio(sums[0]),
        ratio(sums[1]),
        ratio(sums[2]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn self_coherence_is_one() {
        let x = noise(1, 1080);
        let s = cpc_from_series(&x, &x, 4.0).unwrap();
        for (c, p) in s.coherence.iter().zip(&s.cpc_index).skip(1) {
            if *p > 0.0 {
                assert!((c - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn independent_noise_has_low_coherence() {
        let s = cpc_from_series(&noise(11, 1080), &noise(12, 1080), 4.0).unwrap();
        let mean = s.coherence.iter().sum::<f64>() / s.coherence.len() as f64;
        assert!(mean < 0.35, "{mean}");
        assert!(s.coherence.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn shared_tone_dominates() {
        let n = 1080;
        let tone: Vec<f64> = (0..n).map(|i| (2.0 * PI * 0.3 * i as f64 / 4.0).sin()).collect();
        let a: Vec<f64> = tone.iter().zip(noise(3, n)).map(|(t, e)| t + 0.5 * e).collect();
        let b: Vec<f64> = tone.iter().zip(noise(4, n)).map(|(t, e)| t + 0.5 * e).collect();
        let s = cpc_from_series(&a, &b, 4.0).unwrap();
        let k = (0..s.cpc_index.len())
            .max_by(|&i, &j| s.cpc_index[i].total_cmp(&s.cpc_index[j]))
            .unwrap();
        let bin = s.freqs_hz[1];
        assert!((s.freqs_hz[k] - 0.3).abs() <= bin / 2.0 + 1e-12);
    }

    #[test]
    fn scale_invariance() {
        let a = noise(5, 600);
        let b: Vec<f64> = a.iter().zip(noise(6, 600)).map(|(x, e)| x + e).collect();
        let s1 = cpc_from_series(&a, &b, 4.0).unwrap();
        let scaled: Vec<f64> = a.iter().map(|v| 37.0 * v).collect();
        let s2 = cpc_from_series(&scaled, &b, 4.0).unwrap();
        for (p, q) in s1.cpc_index.iter().zip(&s2.cpc_index) {
            assert!((p - q).abs() <= 1e-9 * p.abs().max(1e-12));
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            cpc_from_series(&[0.0; 10], &[0.0; 11], 4.0),
            Err(RespFeatureError::LengthMismatch(10, 11))
        ));
        assert!(matches!(
            cpc_from_series(&noise(1, 40), &noise(2, 40), 4.0),
            Err(RespFeatureError::InsufficientData(_))
        ));
    }

    fn synthetic(freqs: Vec<f64>, cpc: Vec<f64>) -> CpcSpectrum {
        CpcSpectrum {
            coherence: vec![1.0; freqs.len()],
            freqs_hz: freqs,
            cpc_index: cpc,
        }
    }

    #[test]
    fn single_hf_bin() {
        let freqs: Vec<f64> = (0..=50).map(|k| k as f64 * 0.01).collect();
        let mut cpc = vec![0.0; 51];
        cpc[25] = 2.0;
        let f = cpc_band_features(&synthetic(freqs, cpc));
        assert_eq!(f, [Some(0.0), Some(0.0), Some(2.0), Some(0.0), Some(0.0), Some(1.0)]);
    }

    #[test]
    fn uniform_spectrum_ratios_follow_band_widths() {
        let df = 0.5 / 240.0;
        let freqs: Vec<f64> = (0..=240).map(|k| k as f64 * df).collect();
        let f = cpc_band_features(&synthetic(freqs, vec![1.0; 241]));
        let total_width = 0.5;
        for (got, width) in [(f[3], 0.01), (f[4], 0.09), (f[5], 0.30)] {
            assert!((got.unwrap() - width / total_width).abs() <= 2.0 * df / total_width);
        }
    }

    #[test]
    fn boundary_bins_go_up_and_zero_total() {
        let freqs = vec![0.0, 0.01, 0.1, 0.4];
        let f = cpc_band_features(&synthetic(freqs.clone(), vec![1.0, 1.0, 1.0, 1.0]));
        assert_eq!(&f[..3], &[Some(1.0), Some(1.0), Some(1.0)]);
        let ratio_sum: f64 = f[3..].iter().map(|r| r.unwrap()).sum();
        assert!((ratio_sum - 0.75).abs() < 1e-12);
        let z = cpc_band_features(&synthetic(freqs, vec![0.0; 4]));
        assert_eq!(&z[3..], &[None, None, None]);
    }
}
