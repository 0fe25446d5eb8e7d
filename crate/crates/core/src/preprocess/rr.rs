use serde::{Deserialize, Serialize};

use super::PreprocessError;

/// Physiologically plausible RR range (30–200 bpm).
pub const RR_MIN_S: f64 = 0.3;
pub const RR_MAX_S: f64 = 2.0;
/// Longest run of rejected intervals bridged by interpolation.
pub const MAX_REPAIR_RUN: usize = 3;

/// RR intervals derived from R-peak times. Interval `i` spans
/// `peak_times_s[i]..peak_times_s[i + 1]` and is timestamped by its first peak.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    pub peak_times_s: Vec<f64>,
    pub intervals_s: Vec<f64>,
    /// `false` for intervals outside `[RR_MIN_S, RR_MAX_S]`.
    pub valid_mask: Vec<bool>,
    /// Rejected intervals whose value was replaced by interpolation.
    pub repaired_mask: Vec<bool>,
}

impl RrSeries {
    pub fn len(&self) -> usize {
        self.intervals_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals_s.is_empty()
    }

    /// Valid or repaired: the intervals the feature extractors consume.
    pub fn is_usable(&self, i: usize) -> bool {
        self.valid_mask[i] || self.repaired_mask[i]
    }

    pub fn interval_time(&self, i: usize) -> f64 {
        self.peak_times_s[i]
    }

    /// `(time, value)` of every usable interval, in time order.
    pub fn usable(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len())
            .filter(|&i| self.is_usable(i))
            .map(|i| (self.peak_times_s[i], self.intervals_s[i]))
    }
}

/// Build the RR series from peak sample indices: reject implausible
/// intervals and bridge short rejected runs by linear interpolation between
/// the neighbouring valid values.
pub fn rr_from_peaks(peaks: &[usize], sample_rate_hz: f64) -> Result<RrSeries, PreprocessError> {
    if peaks.len() < 2 {
        return Err(PreprocessError::TooFewPeaks(peaks.len()));
    }
    if peaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PreprocessError::UnorderedPeaks);
    }
    let peak_times_s: Vec<f64> = peaks.iter().map(|&p| p as f64 / sample_rate_hz).collect();
    let mut intervals_s: Vec<f64> = peak_times_s.windows(2).map(|w| w[1] - w[0]).collect();
    let valid_mask: Vec<bool> = intervals_s
        .iter()
        .map(|&v| (RR_MIN_S..=RR_MAX_S).contains(&v))
        .collect();
    let mut repaired_mask = vec![false; intervals_s.len()];

    let n = intervals_s.len();
    let mut i = 0;
    while i < n {
        if valid_mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !valid_mask[i] {
            i += 1;
        }
        let end = i; // exclusive
        if end - start <= MAX_REPAIR_RUN && start > 0 && end < n {
            let left = intervals_s[start - 1];
            let right = intervals_s[end];
            let span = (end - start + 1) as f64;
            for k in start..end {
                let frac = (k - start + 1) as f64 / span;
                intervals_s[k] = left + frac * (right - left);
                repaired_mask[k] = true;
            }
        }
    }

    Ok(RrSeries {
        peak_times_s,
        intervals_s,
        valid_mask,
        repaired_mask,
    })
}
