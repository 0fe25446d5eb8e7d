use std::fmt::Write;

use super::ConfusionMatrix;
use crate::signal_io::Stage;

/// Per-subject result row.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectScore {
    pub subject_id: String,
    pub epochs: usize,
    pub accuracy: f64,
    pub kappa: Option<f64>,
}

pub fn format_confusion(cm: &ConfusionMatrix) -> String {
    let norm = cm.row_normalized();
    let mut out = format!("{:<10}", "truth");
    for s in Stage::ALL {
        let _ = write!(out, "{:>16}", s.to_string());
    }
    out.push('\n');
    for (i, s) in Stage::ALL.iter().enumerate() {
        let _ = write!(out, "{:<10}", s.to_string());
        for j in 0..4 {
            let _ = write!(out, "{:>8} ({:>5.1}%)", cm.counts[i][j], 100.0 * norm[i][j]);
        }
        out.push('\n');
    }
    out
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("truth");
    for s in Stage::ALL {
        let _ = write!(out, ",{s}");
    }
    out.push('\n');
    for (i, s) in Stage::ALL.iter().enumerate() {
        let _ = write!(out, "{s}");
        for j in 0..4 {
            let _ = write!(out, ",{}", cm.counts[i][j]);
        }
        out.push('\n');
    }
    out
}

pub fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("accuracy,cumulative_fraction\n");
    for (a, f) in points {
        let _ = writeln!(out, "{a},{f}");
    }
    out
}

pub fn subject_csv(rows: &[SubjectScore]) -> String {
    let mut out = String::from("subject_id,epochs,accuracy,kappa\n");
    for r in rows {
        let kappa = r.kappa.map_or_else(|| "NA".to_string(), |k| k.to_string());
        let _ = writeln!(out, "{},{},{},{}", r.subject_id, r.epochs, r.accuracy, kappa);
    }
    out
}

pub fn format_subject_table(rows: &[SubjectScore]) -> String {
    let mut out = format!("{:<16} {:>7} {:>9} {:>7}\n", "subject", "epochs", "accuracy", "kappa");
    for r in rows {
        let kappa = r.kappa.map_or_else(|| "-".to_string(), |k| format!("{k:.3}"));
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>9.4} {:>7}",
            r.subject_id, r.epochs, r.accuracy, kappa
        );
    }
    out
}

pub fn importance_csv(ranked: &[(String, f64)]) -> String {
    let mut out = String::from("rank,feature,accuracy_drop\n");
    for (i, (name, drop)) in ranked.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, name, drop);
    }
    out
}

pub fn format_importance(ranked: &[(String, f64)], top: usize) -> String {
    let mut out = format!("{:>4}  {:<36} {:>10}\n", "rank", "feature", "drop");
    for (i, (name, drop)) in ranked.iter().take(top).enumerate() {
        let _ = writeln!(out, "{:>4}  {:<36} {:>10.4}", i + 1, name, drop);
    }
    out
}
