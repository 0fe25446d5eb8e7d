use super::RespFeatureError;
use crate::spectrum::{periodogram, PowerSpectrum};
use crate::stats;

pub const BREATH_NAMES: [&str; 25] = [
    "breath_count",
    "breath_interval_mean",
    "breath_interval_sd",
    "peak_amp_mean",
    "peak_amp_sd",
    "trough_mean",
    "trough_sd",
    "inhale_exhale_ratio",
    "signal_mean",
    "signal_sd",
    "signal_range",
    "signal_kurtosis",
    "signal_skewness",
    "zero_crossing_rate",
    "breath_interval_sdiff_sd",
    "dominant_freq",
    "dominant_power",
    "total_energy",
    "power_0p1_0p4hz",
    "spectral_entropy",
    "spectral_centroid",
    "dominant_ratio",
    "dominant_bandwidth",
    "second_peak_freq",
    "second_peak_power",
];

pub const MIN_BREATH_SPACING_S: f64 = 1.5;
/// Minimum peak prominence as a fraction of the window's peak-to-peak range.
pub const MIN_PROMINENCE_FRACTION: f64 = 0.1;
/// Search band for breathing spectral peaks.
const SEARCH_BAND: (f64, f64) = (0.05, 1.0);
const RESP_BAND: (f64, f64) = (0.1, 0.4);

/// Breath peaks and the troughs between consecutive peaks (sample indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Breaths {
    pub peaks: Vec<usize>,
    pub troughs: Vec<usize>,
}

fn prominence(x: &[f64], i: usize) -> f64 {
    let h = x[i];
    let mut left_min = h;
    for j in (0..i).rev() {
        if x[j] > h {
            break;
        }
        left_min = left_min.min(x[j]);
    }
    let mut right_min = h;
    for &v in &x[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Local maxima with prominence at least 10% of the peak-to-peak range,
/// thinned greedily by height to a minimum spacing of 1.5 s.
pub fn detect_breaths(x: &[f64], rate_hz: f64) -> Result<Breaths, RespFeatureError> {
    if x.len() < 3 {
        return Err(RespFeatureError::NoBreathsDetected);
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(RespFeatureError::NoBreathsDetected);
    }
    let min_prom = MIN_PROMINENCE_FRACTION * range;
    let mut candidates: Vec<usize> = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i] > x[i - 1] {
            // walk across a plateau and take its first sample
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] && prominence(x, i) >= min_prom {
                candidates.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let spacing = (MIN_BREATH_SPACING_S * rate_hz).ceil() as usize;
    let mut by_height = candidates.clone();
    by_height.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in by_height {
        if kept.iter().all(|&k| c.abs_diff(k) >= spacing) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    if kept.len() < 2 {
        return Err(RespFeatureError::NoBreathsDetected);
    }
    let troughs = kept
        .windows(2)
        .map(|w| (w[0]..=w[1]).min_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap())
        .collect();
    Ok(Breaths { peaks: kept, troughs })
}

fn sd_or_none(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| stats::std_dev(v))
}

fn mean_or_none(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| stats::mean(v))
}

fn time_features(x: &[f64], rate_hz: f64) -> [Option<f64>; 15] {
    let breaths = detect_breaths(x, rate_hz).ok();
    let (intervals, amps, troughs, ratios) = match &breaths {
        Some(b) => {
            let intervals: Vec<f64> = b.peaks.windows(2).map(|w| (w[1] - w[0]) as f64 / rate_hz).collect();
            let amps: Vec<f64> = b.peaks.iter().map(|&p| x[p]).collect();
            let troughs: Vec<f64> = b.troughs.iter().map(|&t| x[t]).collect();
            let ratios: Vec<f64> = b
                .peaks
                .windows(2)
                .zip(&b.troughs)
                .filter(|(w, &t)| t > w[0] && t < w[1])
                .map(|(w, &t)| (w[1] - t) as f64 / (t - w[0]) as f64)
                .collect();
            (intervals, amps, troughs, ratios)
        }
        None => Default::default(),
    };
    let interval_diffs: Vec<f64> = intervals.windows(2).map(|w| w[1] - w[0]).collect();
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let mean = stats::mean(x);
    [
        Some(breaths.as_ref().map_or(0, |b| b.peaks.len()) as f64),
        mean_or_none(&intervals),
        sd_or_none(&intervals),
        mean_or_none(&amps),
        sd_or_none(&amps),
        mean_or_none(&troughs),
        sd_or_none(&troughs),
        mean_or_none(&ratios),
        Some(mean),
        Some(stats::std_dev(x)),
        Some(hi - lo),
        stats::excess_kurtosis(x),
        stats::skewness(x),
        Some(stats::zero_crossings(x, mean) as f64 * rate_hz / x.len() as f64),
        sd_or_none(&interval_diffs),
    ]
}

/// Contiguous run of bins around `k` holding at least half of its power.
fn half_power_lobe(power: &[f64], k: usize, lo: usize, hi: usize) -> (usize, usize) {
    let half = power[k] / 2.0;
    let mut a = k;
    while a > lo && power[a - 1] >= half {
        a -= 1;
    }
    let mut b = k;
    while b + 1 < hi && power[b + 1] >= half {
        b += 1;
    }
    (a, b)
}

fn frequency_features(spec: &PowerSpectrum) -> [Option<f64>; 10] {
    let idx: Vec<usize> = (0..spec.freqs_hz.len())
        .filter(|&k| spec.freqs_hz[k] >= SEARCH_BAND.0 && spec.freqs_hz[k] < SEARCH_BAND.1)
        .collect();
    let total = spec.total();
    let band_total: f64 = idx.iter().map(|&k| spec.power[k]).sum();
    let resp = spec.band_power(RESP_BAND.0, RESP_BAND.1);
    if idx.is_empty() || !(band_total > 0.0) {
        return [None, None, Some(total), Some(resp), None, None, None, None, None, None];
    }
    let (lo, hi) = (idx[0], idx[idx.len() - 1] + 1);
    let dom = (lo..hi).fold(lo, |best, k| if spec.power[k] > spec.power[best] { k } else { best });
    let entropy = idx
        .iter()
        .map(|&k| spec.power[k] / band_total)
        .filter(|q| *q > 0.0)
        .map(|q| -q * q.ln())
        .sum::<f64>()
        / (idx.len() as f64).ln().max(f64::MIN_POSITIVE);
    let centroid = idx.iter().map(|&k| spec.freqs_hz[k] * spec.power[k]).sum::<f64>() / band_total;
    let (a, b) = half_power_lobe(&spec.power, dom, lo, hi);
    let bandwidth = (b - a + 1) as f64 * spec.bin_width();
    // strongest local maximum outside the dominant lobe
    let second = (lo..hi)
        .filter(|&k| k < a || k > b)
        .filter(|&k| {
            (k == 0 || spec.power[k] >= spec.power[k - 1])
                && (k + 1 >= spec.power.len() || spec.power[k] >= spec.power[k + 1])
        })
        .fold(None, |best: Option<usize>, k| match best {
            Some(j) if spec.power[j] >= spec.power[k] => best,
            _ => Some(k),
        });
    [
        Some(spec.freqs_hz[dom]),
        Some(spec.power[dom]),
        Some(total),
        Some(resp),
        Some(entropy),
        Some(centroid),
        Some(spec.power[dom] / band_total),
        Some(bandwidth),
        second.map(|k| spec.freqs_hz[k]),
        second.map(|k| spec.power[k]),
    ]
}

/// The 25 breathing features of a window of cleaned breathing samples,
/// aligned with [`BREATH_NAMES`]. Interval, amplitude and trough entries are
/// `None` when fewer than two breaths are found.
pub fn breath_features(x: &[f64], rate_hz: f64) -> Result<[Option<f64>; 25], RespFeatureError> {
    if x.len() < 3 {
        return Err(RespFeatureError::InsufficientData(format!(
            "{} breathing samples",
            x.len()
        )));
    }
    let mut out = [None; 25];
    out[..15].copy_from_slice(&time_features(x, rate_hz));
    out[15..].copy_from_slice(&frequency_features(&periodogram(x, rate_hz)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn get(f: &[Option<f64>; 25], name: &str) -> Option<f64> {
        f[BREATH_NAMES.iter().position(|n| *n == name).unwrap()]
    }

    fn sine(freq: f64, secs: f64, rate: f64) -> Vec<f64> {
        (0..(secs * rate) as usize)
            .map(|i| (2.0 * PI * freq * i as f64 / rate).sin())
            .collect()
    }

    #[test]
    fn pure_sinusoid() {
        let rate = 25.0;
        let x = sine(0.25, 90.0, rate);
        let f = breath_features(&x, rate).unwrap();
        let bin = rate / x.len() as f64;
        assert!((get(&f, "dominant_freq").unwrap() - 0.25).abs() <= bin);
        let interval = get(&f, "breath_interval_mean").unwrap();
        assert!((60.0 / interval - 15.0).abs() < 1e-6);
        assert!(get(&f, "breath_interval_sd").unwrap() < 1e-9);
        assert!((get(&f, "inhale_exhale_ratio").unwrap() - 1.0).abs() < 0.05);
        assert!((get(&f, "zero_crossing_rate").unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn constant_signal() {
        let x = vec![0.3; 750];
        assert_eq!(detect_breaths(&x, 25.0), Err(RespFeatureError::NoBreathsDetected));
        let f = breath_features(&x, 25.0).unwrap();
        assert_eq!(get(&f, "breath_count"), Some(0.0));
        assert_eq!(get(&f, "breath_interval_mean"), None);
        assert_eq!(get(&f, "signal_sd"), Some(0.0));
        assert_eq!(get(&f, "signal_kurtosis"), None);
    }

    #[test]
    fn planted_envelope() {
        let rate = 25.0;
        let n = (90.0 * rate) as usize;
        let env = |t: f64| 1.0 + 0.3 * (2.0 * PI * 0.02 * t).sin();
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                env(t) * (2.0 * PI * 0.25 * t).sin()
            })
            .collect();
        let b = detect_breaths(&x, rate).unwrap();
        // envelope sampled at the sinusoid's crests
        let crests: Vec<f64> = (0..b.peaks.len()).map(|k| env(1.0 + 4.0 * k as f64)).collect();
        assert_eq!(b.peaks.len(), 23);
        let f = breath_features(&x, rate).unwrap();
        let want = stats::std_dev(&crests);
        let got = get(&f, "peak_amp_sd").unwrap();
        assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    }

    #[test]
    fn peaks_respect_spacing() {
        let rate = 25.0;
        // 1 Hz ripple on a 0.2 Hz wave: ripples are too close to count
        let x: Vec<f64> = (0..2250)
            .map(|i| {
                let t = i as f64 / rate;
                (2.0 * PI * 0.2 * t).sin() + 0.05 * (2.0 * PI * 1.0 * t).sin()
            })
            .collect();
        let b = detect_breaths(&x, rate).unwrap();
        let min_gap = b.peaks.windows(2).map(|w| w[1] - w[0]).min().unwrap();
        assert!(min_gap as f64 >= MIN_BREATH_SPACING_S * rate);
        assert_eq!(b.peaks.len(), 18);
    }
}
