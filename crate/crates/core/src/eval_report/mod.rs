//! Scoring: confusion matrices, accuracy, Cohen's kappa, per-subject
//! accuracy CDFs, best/median/worst cases and permutation importance.

mod importance;
mod report;

pub use importance::{permutation_importance, sequence_accuracy};
pub use report::{
    cdf_csv, confusion_csv, format_confusion, format_importance, format_subject_table, importance_csv, subject_csv,
    SubjectScore,
};

use std::ops::{Add, AddAssign};

use thiserror::Error;

use crate::model_blstm::ModelError;
use crate::signal_io::Stage;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction has {pred} epochs, truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("kappa is undefined: expected agreement is 1")]
    DegenerateMarginals,
    #[error("empty list")]
    EmptyList,
    #[error("permutation importance needs at least one repeat")]
    InvalidRepeats,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rows are truth, columns prediction, both in Wake, Light, Deep, REM order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sums(&self) -> [u64; 4] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn col_sums(&self) -> [u64; 4] {
        let mut c = [0; 4];
        for r in &self.counts {
            for (k, v) in r.iter().enumerate() {
                c[k] += v;
            }
        }
        c
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn row_normalized(&self) -> [[f64; 4]; 4] {
        let sums = self.row_sums();
        let mut out = [[0.0; 4]; 4];
        for (i, row) in self.counts.iter().enumerate() {
            if sums[i] > 0 {
                for j in 0..4 {
                    out[i][j] = row[j] as f64 / sums[i] as f64;
                }
            }
        }
        out
    }

    /// Largest off-diagonal cell as `(truth, predicted, count)`.
    pub fn dominant_error(&self) -> Option<(Stage, Stage, u64)> {
        let mut best: Option<(Stage, Stage, u64)> = None;
        for i in 0..4 {
            for j in 0..4 {
                let v = self.counts[i][j];
                if i != j && v > 0 && best.is_none_or(|b| v > b.2) {
                    best = Some((Stage::ALL[i], Stage::ALL[j], v));
                }
            }
        }
        best
    }
}

impl Add for ConfusionMatrix {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..4 {
            for j in 0..4 {
                self.counts[i][j] += rhs.counts[i][j];
            }
        }
    }
}

pub fn confusion_matrix(pred: &[Stage], truth: &[Stage]) -> Result<ConfusionMatrix, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in pred.iter().zip(truth) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    match cm.total() {
        0 => Err(EvalError::EmptyMatrix),
        n => Ok(cm.trace() as f64 / n as f64),
    }
}

/// Observed and chance agreement `(p_o, p_e)`.
pub fn agreement(cm: &ConfusionMatrix) -> Result<(f64, f64), EvalError> {
    let n = cm.total();
    if n == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let n = n as f64;
    let (rows, cols) = (cm.row_sums(), cm.col_sums());
    let pe = (0..4).map(|k| rows[k] as f64 * cols[k] as f64).sum::<f64>() / (n * n);
    Ok((cm.trace() as f64 / n, pe))
}

/// `κ = (p_o − p_e) / (1 − p_e)`.
pub fn cohens_kappa(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let (po, pe) = agreement(cm)?;
    if pe >= 1.0 {
        return Err(EvalError::DegenerateMarginals);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Empirical CDF as `(value, fraction ≤ value)` at each distinct value.
pub fn per_subject_cdf(accuracies: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    if accuracies.is_empty() {
        return Err(EvalError::EmptyList);
    }
    let sorted = crate::stats::sorted(accuracies);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    Ok(out)
}

/// Ids of the best, median (lower middle) and worst subjects. Equal
/// accuracies are ordered by id.
pub fn rank_cases(scores: &[(String, f64)]) -> Result<(String, String, String), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyList);
    }
    let mut asc: Vec<&(String, f64)> = scores.iter().collect();
    asc.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let worst = asc[0].0.clone();
    let median = asc[(asc.len() - 1) / 2].0.clone();
    let top = asc[asc.len() - 1].1;
    let best = asc.iter().find(|s| s.1 == top).unwrap().0.clone();
    Ok((best, median, worst))
}
