use super::{need_count, successive_diffs, FeatureError};
use crate::stats;

pub const NONLINEAR_NAMES: [&str; 5] = [
    "sample_entropy",
    "zero_crossings",
    "zero_crossing_rate",
    "poincare_sd1",
    "poincare_sd2",
];

/// Minimum series length for sample entropy.
pub const SAMPEN_MIN_LEN: usize = 50;
pub const SAMPEN_M: usize = 2;
pub const SAMPEN_R_FACTOR: f64 = 0.2;

/// Sample entropy `-ln(A/B)` with Chebyshev tolerance `r`: `B` counts pairs
/// of length-`m` templates within `r`, `A` the pairs that still match when
/// extended to `m + 1`. Both use the first `N - m` templates. `None` when
/// either count is zero.
pub fn sample_entropy(x: &[f64], m: usize, r: f64) -> Option<f64> {
    let n = x.len();
    if n <= m + 1 {
        return None;
    }
    let templates = n - m;
    let mut b = 0u64;
    let mut a = 0u64;
    for i in 0..templates {
        for j in i + 1..templates {
            let close = (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r);
            if close {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    if a == 0 || b == 0 {
        return None;
    }
    Some(-((a as f64) / (b as f64)).ln())
}

/// Sample entropy (m = 2, r = 0.2·SD), zero crossings of the mean-centered
/// series, and Poincaré SD1/SD2.
///
/// SD1 is the RMS distance of successive-interval pairs from the identity
/// line, so `SD1 = RMSSD / √2` exactly; SD2 is the spread along it.
pub fn nonlinear_features(rr: &[f64]) -> Result<[Option<f64>; 5], FeatureError> {
    need_count(rr.len(), 2)?;
    let sampen = if rr.len() >= SAMPEN_MIN_LEN {
        sample_entropy(rr, SAMPEN_M, SAMPEN_R_FACTOR * stats::std_dev(rr))
    } else {
        None
    };
    let crossings = stats::zero_crossings(rr, stats::mean(rr));
    let diffs = successive_diffs(rr);
    let sd1 = (diffs.iter().map(|d| d * d / 2.0).sum::<f64>() / diffs.len() as f64).sqrt();
    let along: Vec<f64> = rr
        .windows(2)
        .map(|w| (w[0] + w[1]) / std::f64::consts::SQRT_2)
        .collect();
    Ok([
        sampen,
        Some(crossings as f64),
        Some(crossings as f64 / (rr.len() - 1) as f64),
        Some(sd1),
        Some(stats::std_dev(&along)),
    ])
}
