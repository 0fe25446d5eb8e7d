//! Sudden-variation features.
//!
//! Over a window of `n` consecutive epochs (clipped at the recording edges):
//!
//! * `f1 = mean(mid epoch) − mean(all intervals in window)`, `n = 119`
//! * `f2 = mean(mid epoch) − median(all intervals in window)`, `n = 9`
//! * `f3 = sqrt(1/n' · Σ_i (mean(epoch i) − mean(all))²)`, `n = 9`, where
//!   `n'` counts the epochs that hold at least one interval.
//!
//! Means over the window are over the raw intervals, not over epoch means.

use super::FeatureError;
use crate::stats;

pub const NOVEL_NAMES: [&str; 3] = ["sudden_var_f1", "sudden_var_f2", "sudden_var_f3"];

/// Window summaries the three features are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct RrWindowStats {
    /// Mean of each non-empty epoch, in window order.
    pub epoch_means: Vec<f64>,
    pub window_mean: f64,
    pub window_median: f64,
    pub mid_epoch_mean: Option<f64>,
}

impl RrWindowStats {
    /// `epochs` are the per-epoch interval lists of the window; `mid` indexes
    /// the center epoch within it.
    pub fn new(epochs: &[&[f64]], mid: usize) -> Result<Self, FeatureError> {
        let all: Vec<f64> = epochs.iter().flat_map(|e| e.iter().copied()).collect();
        if all.is_empty() {
            return Err(FeatureError::NoValidEpochs);
        }
        let epoch_means = epochs
            .iter()
            .filter(|e| !e.is_empty())
            .map(|e| stats::mean(e))
            .collect();
        let mid_epoch_mean = epochs.get(mid).filter(|e| !e.is_empty()).map(|e| stats::mean(e));
        Ok(Self {
            epoch_means,
            window_mean: stats::mean(&all),
            window_median: stats::median(&all),
            mid_epoch_mean,
        })
    }
}

pub fn novel_f1(epochs: &[&[f64]], mid: usize) -> Result<f64, FeatureError> {
    let s = RrWindowStats::new(epochs, mid).map_err(|_| FeatureError::MissingCenter)?;
    let mid_mean = s.mid_epoch_mean.ok_or(FeatureError::MissingCenter)?;
    Ok(mid_mean - s.window_mean)
}

pub fn novel_f2(epochs: &[&[f64]], mid: usize) -> Result<f64, FeatureError> {
    let s = RrWindowStats::new(epochs, mid).map_err(|_| FeatureError::MissingCenter)?;
    let mid_mean = s.mid_epoch_mean.ok_or(FeatureError::MissingCenter)?;
    Ok(mid_mean - s.window_median)
}

pub fn novel_f3(epochs: &[&[f64]]) -> Result<f64, FeatureError> {
    let s = RrWindowStats::new(epochs, 0)?;
    let n = s.epoch_means.len() as f64;
    let ss: f64 = s
        .epoch_means
        .iter()
        .map(|m| (m - s.window_mean) * (m - s.window_mean))
        .sum();
    Ok((ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_intervals_give_zero() {
        let e = vec![0.8; 37];
        let epochs: Vec<&[f64]> = (0..9).map(|_| &e[..]).collect();
        assert_eq!(novel_f1(&epochs, 4).unwrap(), 0.0);
        assert_eq!(novel_f2(&epochs, 4).unwrap(), 0.0);
        assert_eq!(novel_f3(&epochs).unwrap(), 0.0);
    }

    #[test]
    fn f1_against_brute_force_mean() {
        let base = vec![0.8; 30];
        let mid = vec![1.0; 30];
        let mut epochs: Vec<&[f64]> = vec![&base[..]; 119];
        epochs[59] = &mid;
        let all: Vec<f64> = epochs.iter().flat_map(|e| e.iter().copied()).collect();
        let brute = 1.0 - all.iter().sum::<f64>() / all.len() as f64;
        let f1 = novel_f1(&epochs, 59).unwrap();
        assert!((f1 - brute).abs() < 1e-12);
        assert!((f1 - (1.0 - (1.0 + 118.0 * 0.8) / 119.0)).abs() < 1e-12);
    }

    #[test]
    fn f1_on_clipped_window() {
        let base = vec![0.8; 30];
        let mid = vec![1.0; 30];
        let mut epochs: Vec<&[f64]> = vec![&base[..]; 60];
        epochs[0] = &mid;
        let f1 = novel_f1(&epochs, 0).unwrap();
        assert!((f1 - (1.0 - (1.0 + 59.0 * 0.8) / 60.0)).abs() < 1e-12);
    }

    #[test]
    fn f2_uses_the_window_median() {
        let base = vec![0.8; 30];
        let mid = vec![1.0; 30];
        let mut epochs: Vec<&[f64]> = vec![&base[..]; 9];
        epochs[4] = &mid;
        assert!((novel_f2(&epochs, 4).unwrap() - 0.2).abs() < 1e-12);

        // symmetric perturbations away from the middle leave the median alone
        let up = vec![0.9; 30];
        let down = vec![0.7; 30];
        epochs[1] = &up;
        epochs[7] = &down;
        assert!((novel_f2(&epochs, 4).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn f3_hand_arithmetic() {
        let a = vec![0.8; 10];
        let b = vec![1.1; 10];
        let epochs: Vec<&[f64]> = vec![&a, &a, &b];
        let want = ((0.01f64 + 0.01 + 0.04) / 3.0).sqrt();
        assert!((novel_f3(&epochs).unwrap() - want).abs() < 1e-12);
        let permuted: Vec<&[f64]> = vec![&b, &a, &a];
        assert!((novel_f3(&permuted).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn empty_center_and_empty_window() {
        let a = vec![0.8; 10];
        let empty: Vec<f64> = Vec::new();
        let epochs: Vec<&[f64]> = vec![&a, &empty, &a];
        assert_eq!(novel_f1(&epochs, 1), Err(FeatureError::MissingCenter));
        assert_eq!(novel_f2(&epochs, 1), Err(FeatureError::MissingCenter));
        assert!(novel_f3(&epochs).is_ok());
        let none: Vec<&[f64]> = vec![&empty, &empty];
        assert_eq!(novel_f3(&none), Err(FeatureError::NoValidEpochs));
    }
}
