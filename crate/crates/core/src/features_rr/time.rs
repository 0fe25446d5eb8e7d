use super::{need_count, successive_diffs, FeatureError};
use crate::stats::{self, quantile_sorted};

pub const HRV_NAMES: [&str; 10] = [
    "mean_nn",
    "sdnn",
    "rmssd",
    "sdsd",
    "pnn50",
    "pnn20",
    "nn50",
    "median_nn",
    "hr_mean",
    "hr_sd",
];

/// Standard time-domain HRV measures (seconds; heart rate in bpm; pNNx as
/// fractions).
pub fn hrv_time_features(rr: &[f64]) -> Result<[Option<f64>; 10], FeatureError> {
    need_count(rr.len(), 2)?;
    let diffs = successive_diffs(rr);
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let nn50 = diffs.iter().filter(|d| d.abs() > 0.050).count();
    let nn20 = diffs.iter().filter(|d| d.abs() > 0.020).count();
    let hr: Vec<f64> = rr.iter().map(|v| 60.0 / v).collect();
    Ok([
        Some(stats::mean(rr)),
        Some(stats::std_dev(rr)),
        Some(rmssd),
        Some(stats::std_dev(&diffs)),
        Some(nn50 as f64 / diffs.len() as f64),
        Some(nn20 as f64 / diffs.len() as f64),
        Some(nn50 as f64),
        Some(stats::median(rr)),
        Some(stats::mean(&hr)),
        Some(stats::std_dev(&hr)),
    ])
}

pub const STAT_NAMES: [&str; 34] = [
    "mean",
    "sd",
    "min",
    "max",
    "range",
    "median",
    "q05",
    "q10",
    "q25",
    "q75",
    "q90",
    "q95",
    "iqr",
    "skewness",
    "kurtosis",
    "mad",
    "cv",
    "trimmed_mean_10",
    "trimmed_mean_25",
    "half_mean_diff",
    "acf1",
    "acf2",
    "acf3",
    "acf4",
    "acf5",
    "sdiff_sd",
    "sdiff_max_abs",
    "count_above_mean",
    "count_below_mean",
    "longest_run_above_mean",
    "trend_slope",
    "trend_intercept",
    "energy",
    "mean_abs_sdiff",
];

pub const STAT_MIN_LEN: usize = 4;

fn trimmed_mean(sorted: &[f64], fraction: f64) -> f64 {
    let cut = (fraction * sorted.len() as f64).floor() as usize;
    stats::mean(&sorted[cut..sorted.len() - cut])
}

fn autocorrelation(x: &[f64], lag: usize, mean: f64, degenerate: bool) -> Option<f64> {
    if degenerate || x.len() <= lag {
        return None;
    }
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = x.iter().zip(&x[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum();
    Some(num / denom)
}

/// Least-squares line through `(i, x[i])`: `(slope, intercept)`.
fn linear_trend(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = stats::mean(x);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, x_mean - slope * t_mean)
}

/// Descriptive statistics of the RR window, aligned with [`STAT_NAMES`].
pub fn statistical_features(rr: &[f64]) -> Result<[Option<f64>; 34], FeatureError> {
    need_count(rr.len(), STAT_MIN_LEN)?;
    let sorted = stats::sorted(rr);
    let mean = stats::mean(rr);
    let sd = stats::std_dev(rr);
    let degenerate = stats::is_degenerate(rr);
    let median = quantile_sorted(&sorted, 0.5);
    let q = |p: f64| quantile_sorted(&sorted, p);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let abs_dev: Vec<f64> = rr.iter().map(|v| (v - median).abs()).collect();
    let half = rr.len() / 2;
    let diffs = successive_diffs(rr);
    let above = rr.iter().filter(|&&v| v > mean).count();
    let below = rr.iter().filter(|&&v| v < mean).count();
    let longest_above = rr
        .iter()
        .fold((0usize, 0usize), |(best, run), &v| {
            let run = if v > mean { run + 1 } else { 0 };
            (best.max(run), run)
        })
        .0;
    let (slope, intercept) = linear_trend(rr);
    let acf = |lag| autocorrelation(rr, lag, mean, degenerate);

    Ok([
        Some(mean),
        Some(sd),
        Some(min),
        Some(max),
        Some(max - min),
        Some(median),
        Some(q(0.05)),
        Some(q(0.10)),
        Some(q(0.25)),
        Some(q(0.75)),
        Some(q(0.90)),
        Some(q(0.95)),
        Some(q(0.75) - q(0.25)),
        stats::skewness(rr),
        stats::excess_kurtosis(rr),
        Some(stats::median(&abs_dev)),
        (mean != 0.0).then(|| sd / mean),
        Some(trimmed_mean(&sorted, 0.10)),
        Some(trimmed_mean(&sorted, 0.25)),
        Some(stats::mean(&rr[half..]) - stats::mean(&rr[..half])),
        acf(1),
        acf(2),
        acf(3),
        acf(4),
        acf(5),
        Some(stats::std_dev(&diffs)),
        Some(diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()))),
        Some(above as f64),
        Some(below as f64),
        Some(longest_above as f64),
        Some(slope),
        Some(intercept),
        Some(rr.iter().map(|v| v * v).sum()),
        Some(diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64),
    ])
}
