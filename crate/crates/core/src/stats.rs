//! Small descriptive-statistics helpers shared by the feature extractors.
//!
//! Variances and standard deviations use the population (divide-by-N)
//! convention throughout.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    // one refinement pass removes most of the summation rounding, which
    // makes the mean of constant data exact
    m + x.iter().map(|v| v - m).sum::<f64>() / n
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of already-sorted data, linear interpolation between order
/// statistics (position `(n-1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn median(x: &[f64]) -> f64 {
    quantile_sorted(&sorted(x), 0.5)
}

/// Central moments (m2, m3, m4) about the mean.
pub fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// True when the spread of `x` is indistinguishable from rounding noise.
pub fn is_degenerate(x: &[f64]) -> bool {
    let m2 = variance(x);
    let scale = mean(x).abs().max(f64::MIN_POSITIVE);
    !(m2.sqrt() > 1e-12 * scale)
}

/// Skewness `m3 / m2^1.5`; `None` for zero-variance data.
pub fn skewness(x: &[f64]) -> Option<f64> {
    if is_degenerate(x) {
        return None;
    }
    let (m2, m3, _) = central_moments(x);
    Some(m3 / m2.powf(1.5))
}

/// Excess kurtosis `m4 / m2² − 3`; `None` for zero-variance data.
pub fn excess_kurtosis(x: &[f64]) -> Option<f64> {
    if is_degenerate(x) {
        return None;
    }
    let (m2, _, m4) = central_moments(x);
    Some(m4 / (m2 * m2) - 3.0)
}

/// Number of sign changes of `x - center`, skipping exact zeros.
pub fn zero_crossings(x: &[f64], center: f64) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for v in x {
        let d = v - center;
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && (d > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = d;
    }
    count
}
