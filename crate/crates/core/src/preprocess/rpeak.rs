//! Pan–Tompkins style QRS detection.
//!
//! Chain: zero-phase 5–15 Hz band-pass, five-point derivative, squaring,
//! centered 150 ms moving-window integration, then adaptive signal/noise
//! thresholds with a 300 ms refractory period and search-back for missed
//! beats. Each detection is finally moved onto the nearest local maximum of
//! the band-passed signal.

use super::filter::{BandType, Sos};
use super::PreprocessError;
use crate::signal_io::SignalTrace;

pub const MIN_ECG_RATE_HZ: f64 = 100.0;
pub const MIN_ECG_DURATION_S: f64 = 10.0;
pub const REFRACTORY_S: f64 = 0.3;
/// Half-width of the neighbourhood in which a returned index must be the
/// band-passed maximum.
pub const LOCAL_MAX_HALF_WIDTH_S: f64 = 0.05;

const BAND_LOW_HZ: f64 = 5.0;
const BAND_HIGH_HZ: f64 = 15.0;
const INTEGRATION_S: f64 = 0.150;
const LEARNING_S: f64 = 2.0;
const SEARCHBACK_FACTOR: f64 = 1.66;

pub fn bandpass(ecg: &[f64], rate: f64) -> Vec<f64> {
    let hp = Sos::butterworth(2, BAND_LOW_HZ, rate, BandType::HighPass);
    let lp = Sos::butterworth(2, BAND_HIGH_HZ, rate, BandType::LowPass);
    let pad = super::filter::default_pad(BAND_LOW_HZ, rate);
    lp.filtfilt(&hp.filtfilt(ecg, pad), pad)
}

fn derivative(x: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let at = |i: isize| x[i.clamp(0, n - 1) as usize];
    (0..n)
        .map(|i| (2.0 * at(i + 2) + at(i + 1) - at(i - 1) - 2.0 * at(i - 2)) / 8.0)
        .collect()
}

fn moving_average_centered(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let half = width / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i] > x[i - 1] {
            // walk across plateaus
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Climb to an index that is the maximum of `x` within `±half` samples
/// (first index on ties).
fn settle_on_local_max(x: &[f64], start: usize, half: usize) -> usize {
    let mut idx = start;
    loop {
        let lo = idx.saturating_sub(half);
        let hi = (idx + half + 1).min(x.len());
        let best = (lo..hi).fold(lo, |b, i| if x[i] > x[b] { i } else { b });
        if x[best] <= x[idx] {
            return idx;
        }
        idx = best;
    }
}

/// Detected R-peak sample indices, strictly increasing.
pub fn detect_r_peaks(ecg: &SignalTrace) -> Result<Vec<usize>, PreprocessError> {
    let rate = ecg.sample_rate_hz;
    if !(rate >= MIN_ECG_RATE_HZ) {
        return Err(PreprocessError::SampleRateTooLow {
            rate_hz: rate,
            min_hz: MIN_ECG_RATE_HZ,
        });
    }
    if ecg.duration_s() < MIN_ECG_DURATION_S {
        return Err(PreprocessError::SignalTooShort {
            needed_s: MIN_ECG_DURATION_S,
            got_s: ecg.duration_s(),
        });
    }
    let x = &ecg.samples;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(crate::stats::std_dev(x) > 1e-9 * scale.max(1e-300)) {
        return Err(PreprocessError::FlatSignal);
    }

    let bp = bandpass(x, rate);
    let energy: Vec<f64> = derivative(&bp).into_iter().map(|v| v * v).collect();
    let width = ((INTEGRATION_S * rate).round() as usize).max(1);
    let mwi = moving_average_centered(&energy, width);

    let refractory = (REFRACTORY_S * rate).round() as usize;
    let learn = ((LEARNING_S * rate) as usize).min(mwi.len());
    let peak_max = mwi[..learn].iter().fold(0.0f64, |m, &v| m.max(v));
    let mut spki = 0.25 * peak_max;
    let mut npki = 0.5 * crate::stats::mean(&mwi[..learn]);
    if !(peak_max > 0.0) {
        spki = 0.25 * mwi.iter().fold(0.0f64, |m, &v| m.max(v));
    }

    let candidates = local_maxima(&mwi);
    let mut accepted: Vec<usize> = Vec::new();
    let mut rr_avg: Option<f64> = None;
    // candidates since the last accepted beat, for search-back
    let mut pending: Vec<usize> = Vec::new();

    let threshold = |spki: f64, npki: f64| npki + 0.25 * (spki - npki);

    for &c in &candidates {
        let v = mwi[c];
        let t1 = threshold(spki, npki);
        let since_last = accepted.last().map(|&l| c - l);

        if let (Some(gap), Some(avg), Some(&last)) = (since_last, rr_avg, accepted.last()) {
            if gap as f64 > SEARCHBACK_FACTOR * avg {
                let t2 = 0.5 * t1;
                let missed = pending
                    .iter()
                    .copied()
                    .filter(|&p| p >= last + refractory && c >= p + refractory && mwi[p] > t2)
                    .fold(None, |best: Option<usize>, p| match best {
                        Some(b) if mwi[b] >= mwi[p] => Some(b),
                        _ => Some(p),
                    });
                if let Some(p) = missed {
                    spki = 0.25 * mwi[p] + 0.75 * spki;
                    let rr = (p - last) as f64;
                    rr_avg = Some(0.875 * rr_avg.unwrap_or(rr) + 0.125 * rr);
                    accepted.push(p);
                    pending.retain(|&q| q > p);
                }
            }
        }

        let t1 = threshold(spki, npki);
        let clear_of_refractory = accepted.last().is_none_or(|&l| c >= l + refractory);
        if v > t1 && clear_of_refractory {
            if let Some(&last) = accepted.last() {
                let rr = (c - last) as f64;
                rr_avg = Some(match rr_avg {
                    Some(a) => 0.875 * a + 0.125 * rr,
                    None => rr,
                });
            }
            spki = 0.125 * v + 0.875 * spki;
            accepted.push(c);
            pending.clear();
        } else {
            npki = 0.125 * v + 0.875 * npki;
            pending.push(c);
        }
    }

    let search = ((0.075 * rate).round() as usize).max(1);
    let half = ((LOCAL_MAX_HALF_WIDTH_S * rate).round() as usize).max(1);
    let mut peaks: Vec<usize> = Vec::with_capacity(accepted.len());
    for &a in &accepted {
        let lo = a.saturating_sub(search);
        let hi = (a + search + 1).min(bp.len());
        let start = (lo..hi).fold(lo, |b, i| if bp[i] > bp[b] { i } else { b });
        let p = settle_on_local_max(&bp, start, half);
        match peaks.last() {
            Some(&prev) if p < prev + refractory => {
                if bp[p] > bp[prev] {
                    *peaks.last_mut().expect("non-empty") = p;
                }
            }
            _ => peaks.push(p),
        }
    }
    // Replacing a peak can leave it too close to its predecessor.
    let mut cleaned: Vec<usize> = Vec::with_capacity(peaks.len());
    for p in peaks {
        match cleaned.last() {
            Some(&prev) if p < prev + refractory => {
                if bp[p] > bp[prev] {
                    *cleaned.last_mut().expect("non-empty") = p;
                }
            }
            _ => cleaned.push(p),
        }
    }
    if cleaned.is_empty() {
        return Err(PreprocessError::FlatSignal);
    }
    Ok(cleaned)
}
