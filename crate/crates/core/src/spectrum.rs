//! FFT-based spectral estimates: Hann periodograms and Welch cross-spectra.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    pub fn bin_width(&self) -> f64 {
        if self.freqs_hz.len() > 1 {
            self.freqs_hz[1] - self.freqs_hz[0]
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Power in `[lo, hi)`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs_hz
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p)
            .sum()
    }

    /// `(frequency, power)` of the largest bin in `[lo, hi)`.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.freqs_hz
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .fold(None, |best: Option<(f64, f64)>, (&f, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((f, p)),
            })
    }
}

/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / denom).cos())
        .collect()
}

pub fn fft(x: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    if !buf.is_empty() {
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    }
    buf
}

fn one_sided_freqs(n: usize, rate_hz: f64) -> Vec<f64> {
    (0..=n / 2).map(|k| k as f64 * rate_hz / n as f64).collect()
}

/// Mean-removed, Hann-windowed, one-sided periodogram of `x` sampled at
/// `rate_hz`. Normalized so the bins sum to the mean square of the windowed
/// signal.
pub fn periodogram(x: &[f64], rate_hz: f64) -> PowerSpectrum {
    let n = x.len();
    if n == 0 {
        return PowerSpectrum {
            freqs_hz: Vec::new(),
            power: Vec::new(),
        };
    }
    let m = crate::stats::mean(x);
    let w = hann(n);
    let y: Vec<f64> = x.iter().zip(&w).map(|(v, w)| (v - m) * w).collect();
    let spec = fft(&y);
    let norm = (n * n) as f64;
    let power = (0..=n / 2)
        .map(|k| {
            let p = spec[k].norm_sqr() / norm;
            let mirrored = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            if mirrored {
                2.0 * p
            } else {
                p
            }
        })
        .collect();
    PowerSpectrum {
        freqs_hz: one_sided_freqs(n, rate_hz),
        power,
    }
}

/// Averaged auto- and cross-spectra from Welch's method.
#[derive(Debug, Clone)]
pub struct CrossSpectra {
    pub freqs_hz: Vec<f64>,
    pub pxx: Vec<f64>,
    pub pyy: Vec<f64>,
    pub pxy: Vec<Complex<f64>>,
    pub segments: usize,
}

/// Welch estimate over `segments` half-overlapping Hann-windowed segments
/// spanning `x` and `y` (which must have equal length). Each segment is
/// mean-removed. Returns `None` if the segments would be shorter than
/// `min_segment_len`.
pub fn welch_cross(
    x: &[f64],
    y: &[f64],
    rate_hz: f64,
    segments: usize,
    min_segment_len: usize,
) -> Option<CrossSpectra> {
    assert_eq!(x.len(), y.len(), "welch_cross needs equal-length inputs");
    let n = x.len();
    let seg_len = 2 * n / (segments + 1);
    if segments == 0 || seg_len < min_segment_len.max(2) {
        return None;
    }
    let step = seg_len / 2;
    let w = hann(seg_len);
    let n_bins = seg_len / 2 + 1;
    let mut pxx = vec![0.0; n_bins];
    let mut pyy = vec![0.0; n_bins];
    let mut pxy = vec![Complex::new(0.0, 0.0); n_bins];
    let mut planner = FftPlanner::new();
    let plan = planner.plan_fft_forward(seg_len);
    let window_seg = |s: &[f64]| -> Vec<Complex<f64>> {
        let m = crate::stats::mean(s);
        let mut buf: Vec<Complex<f64>> = s.iter().zip(&w).map(|(v, w)| Complex::new((v - m) * w, 0.0)).collect();
        plan.process(&mut buf);
        buf
    };
    for s in 0..segments {
        let start = s * step;
        let fx = window_seg(&x[start..start + seg_len]);
        let fy = window_seg(&y[start..start + seg_len]);
        for k in 0..n_bins {
            pxx[k] += fx[k].norm_sqr();
            pyy[k] += fy[k].norm_sqr();
            pxy[k] += fx[k].conj() * fy[k];
        }
    }
    let scale = 1.0 / (segments as f64 * rate_hz * w.iter().map(|v| v * v).sum::<f64>());
    for k in 0..n_bins {
        pxx[k] *= scale;
        pyy[k] *= scale;
        pxy[k] *= scale;
    }
    Some(CrossSpectra {
        freqs_hz: one_sided_freqs(seg_len, rate_hz),
        pxx,
        pyy,
        pxy,
        segments,
    })
}
