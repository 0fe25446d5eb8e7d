//! Subject selection: AHI grading, sleep-architecture filter, six-to-four
//! stage merging and subject-disjoint train/validation splitting.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal_io::{Hypnogram, SixStage, Stage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CohortError {
    #[error("AHI must be a non-negative number, got {0}")]
    NegativeAhi(f64),
    #[error("hypnogram has no epochs")]
    EmptyHypnogram,
    #[error("subject list is empty")]
    EmptyList,
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("subject id `{0}` appears more than once")]
    DuplicateId(String),
}

/// Severity grade, ordered from mildest to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AhiLevel {
    NoApnea,
    Mild,
    Medium,
    Severe,
}

impl fmt::Display for AhiLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AhiLevel::NoApnea => "no-apnea",
            AhiLevel::Mild => "mild",
            AhiLevel::Medium => "medium",
            AhiLevel::Severe => "severe",
        };
        f.write_str(s)
    }
}

/// `< 5` none, `[5, 15)` mild, `[15, 30]` medium, `> 30` severe.
pub fn classify_ahi(ahi: f64) -> Result<AhiLevel, CohortError> {
    if !(ahi >= 0.0) {
        return Err(CohortError::NegativeAhi(ahi));
    }
    Ok(if ahi < 5.0 {
        AhiLevel::NoApnea
    } else if ahi < 15.0 {
        AhiLevel::Mild
    } else if ahi <= 30.0 {
        AhiLevel::Medium
    } else {
        AhiLevel::Severe
    })
}

/// Which epochs form the denominator of the architecture fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SleepDenominator {
    /// Every scored epoch, wake included.
    #[default]
    AllEpochs,
    /// Non-wake epochs only.
    SleepEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SleepThresholds {
    pub min_deep_fraction: f64,
    pub min_rem_fraction: f64,
    pub denominator: SleepDenominator,
}

impl Default for SleepThresholds {
    fn default() -> Self {
        Self {
            min_deep_fraction: 0.05,
            min_rem_fraction: 0.15,
            denominator: SleepDenominator::AllEpochs,
        }
    }
}

/// Deep (S3 + S4) and REM fractions of a six-class hypnogram.
pub fn architecture_fractions(
    hypnogram: &Hypnogram<SixStage>,
    denominator: SleepDenominator,
) -> Result<(f64, f64), CohortError> {
    let count = |pred: fn(&SixStage) -> bool| hypnogram.labels.iter().filter(|s| pred(s)).count();
    let deep = count(|s| matches!(s, SixStage::S3 | SixStage::S4));
    let rem = count(|s| *s == SixStage::Rem);
    let total = match denominator {
        SleepDenominator::AllEpochs => hypnogram.labels.len(),
        SleepDenominator::SleepEpochs => count(|s| *s != SixStage::Wake),
    };
    if total == 0 {
        return Err(CohortError::EmptyHypnogram);
    }
    Ok((deep as f64 / total as f64, rem as f64 / total as f64))
}

/// At least 5% deep sleep and at least 15% REM, both inclusive.
pub fn is_regular_sleep(hypnogram: &Hypnogram<SixStage>, thresholds: &SleepThresholds) -> Result<bool, CohortError> {
    let (deep, rem) = architecture_fractions(hypnogram, thresholds.denominator)?;
    Ok(deep >= thresholds.min_deep_fraction && rem >= thresholds.min_rem_fraction)
}

pub fn merge_stage(stage: SixStage) -> Stage {
    match stage {
        SixStage::Wake => Stage::Wake,
        SixStage::S1 | SixStage::S2 => Stage::Light,
        SixStage::S3 | SixStage::S4 => Stage::Deep,
        SixStage::Rem => Stage::Rem,
    }
}

pub fn merge_stages(hypnogram: &Hypnogram<SixStage>) -> Hypnogram<Stage> {
    Hypnogram::new(
        hypnogram.epoch_len_s,
        hypnogram.labels.iter().map(|s| merge_stage(*s)).collect(),
    )
}

/// A subject offered for selection; `ahi` and `hypnogram` may be absent in
/// incomplete metadata.
#[derive(Debug, Clone)]
pub struct CohortCandidate {
    pub subject_id: String,
    pub ahi: Option<f64>,
    pub hypnogram: Option<Hypnogram<SixStage>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CohortDecision {
    Kept,
    ApneaExcluded,
    IrregularSleep,
    MissingMetadata,
}

impl fmt::Display for CohortDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CohortDecision::Kept => "kept",
            CohortDecision::ApneaExcluded => "apnea",
            CohortDecision::IrregularSleep => "irregular-sleep",
            CohortDecision::MissingMetadata => "missing-metadata",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortRow {
    pub subject_id: String,
    pub ahi: Option<f64>,
    pub deep_fraction: Option<f64>,
    pub rem_fraction: Option<f64>,
    pub decision: CohortDecision,
}

#[derive(Debug, Clone)]
pub struct CohortSelection {
    /// Kept subjects with their merged four-class hypnograms, input order.
    pub kept: Vec<(String, Hypnogram<Stage>)>,
    /// One row per candidate.
    pub report: Vec<CohortRow>,
}

/// Keep subjects with no apnea and regular sleep architecture.
pub fn select_cohort(candidates: &[CohortCandidate], thresholds: &SleepThresholds) -> CohortSelection {
    let mut kept = Vec::new();
    let mut report = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut row = CohortRow {
            subject_id: c.subject_id.clone(),
            ahi: c.ahi,
            deep_fraction: None,
            rem_fraction: None,
            decision: CohortDecision::MissingMetadata,
        };
        let (Some(ahi), Some(hyp)) = (c.ahi, c.hypnogram.as_ref()) else {
            log::warn!("{}: missing AHI or hypnogram, excluded", c.subject_id);
            report.push(row);
            continue;
        };
        let (level, fractions) = match (classify_ahi(ahi), architecture_fractions(hyp, thresholds.denominator)) {
            (Ok(level), Ok(fr)) => (level, fr),
            (level, fr) => {
                log::warn!("{}: unusable metadata ({level:?}, {fr:?}), excluded", c.subject_id);
                report.push(row);
                continue;
            }
        };
        row.deep_fraction = Some(fractions.0);
        row.rem_fraction = Some(fractions.1);
        row.decision = if level != AhiLevel::NoApnea {
            CohortDecision::ApneaExcluded
        } else if fractions.0 >= thresholds.min_deep_fraction && fractions.1 >= thresholds.min_rem_fraction {
            kept.push((c.subject_id.clone(), merge_stages(hyp)));
            CohortDecision::Kept
        } else {
            CohortDecision::IrregularSleep
        };
        report.push(row);
    }
    CohortSelection { kept, report }
}

/// Fixed-width text table of a cohort report.
pub fn format_cohort_report(rows: &[CohortRow]) -> String {
    let opt = |v: Option<f64>, scale: f64| v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", v * scale));
    let mut out = format!(
        "{:<16} {:>7} {:>7} {:>7}  {}\n",
        "subject", "ahi", "%deep", "%rem", "decision"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:>7} {:>7} {:>7}  {}\n",
            r.subject_id,
            opt(r.ahi, 1.0),
            opt(r.deep_fraction, 100.0),
            opt(r.rem_fraction, 100.0),
            r.decision
        ));
    }
    out
}

/// Seeded subject-disjoint split: ids are sorted, shuffled, and the first
/// `floor(ratio · N)` go to training.
pub fn split_subjects(
    subject_ids: &[String],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), CohortError> {
    if subject_ids.is_empty() {
        return Err(CohortError::EmptyList);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CohortError::InvalidRatio(ratio));
    }
    let mut seen = BTreeSet::new();
    for id in subject_ids {
        if !seen.insert(id.as_str()) {
            return Err(CohortError::DuplicateId(id.clone()));
        }
    }
    let mut ids: Vec<String> = seen.into_iter().map(String::from).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the epsilon keeps e.g. 0.7 · 10 from flooring to 6
    let n_train = (ratio * ids.len() as f64 + 1e-9).floor() as usize;
    let val = ids.split_off(n_train);
    Ok((ids, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use SixStage::*;

    fn hyp(parts: &[(SixStage, usize)]) -> Hypnogram<SixStage> {
        let labels = parts.iter().flat_map(|&(s, n)| std::iter::repeat_n(s, n)).collect();
        Hypnogram::new(30.0, labels)
    }

    #[test]
    fn ahi_boundaries() {
        let cases = [
            (0.0, AhiLevel::NoApnea),
            (4.9, AhiLevel::NoApnea),
            (4.999, AhiLevel::NoApnea),
            (5.0, AhiLevel::Mild),
            (14.999, AhiLevel::Mild),
            (15.0, AhiLevel::Medium),
            (30.0, AhiLevel::Medium),
            (30.001, AhiLevel::Severe),
        ];
        for (ahi, want) in cases {
            assert_eq!(classify_ahi(ahi).unwrap(), want, "ahi {ahi}");
        }
        assert!(classify_ahi(-0.1).is_err());
        assert!(classify_ahi(f64::NAN).is_err());
    }

    #[test]
    fn regular_sleep_boundaries() {
        let t = SleepThresholds::default();
        assert!(is_regular_sleep(&hyp(&[(S3, 5), (Rem, 15), (S2, 80)]), &t).unwrap());
        assert!(is_regular_sleep(&hyp(&[(S3, 2), (S4, 3), (Rem, 15), (S2, 80)]), &t).unwrap());
        assert!(!is_regular_sleep(&hyp(&[(S3, 4), (Rem, 20), (S2, 76)]), &t).unwrap());
        assert!(!is_regular_sleep(&hyp(&[(S3, 5), (Rem, 14), (S2, 81)]), &t).unwrap());
        assert!(!is_regular_sleep(&hyp(&[(Wake, 100)]), &t).unwrap());
        assert_eq!(is_regular_sleep(&hyp(&[]), &t), Err(CohortError::EmptyHypnogram));
    }

    #[test]
    fn sleep_denominator_switch() {
        // 4 deep of 100 epochs, but 4 of 80 sleep epochs
        let h = hyp(&[(Wake, 20), (S3, 4), (Rem, 16), (S2, 60)]);
        let mut t = SleepThresholds::default();
        assert!(!is_regular_sleep(&h, &t).unwrap());
        t.denominator = SleepDenominator::SleepEpochs;
        assert!(is_regular_sleep(&h, &t).unwrap());
    }

    #[test]
    fn merge_rule() {
        let merged = merge_stages(&Hypnogram::new(30.0, vec![Wake, S1, S2, S3, S4, Rem]));
        assert_eq!(
            merged.labels,
            vec![
                Stage::Wake,
                Stage::Light,
                Stage::Light,
                Stage::Deep,
                Stage::Deep,
                Stage::Rem
            ]
        );
    }

    #[test]
    fn cohort_selection() {
        let good = hyp(&[(S3, 10), (Rem, 20), (S2, 70)]);
        let candidates = vec![
            CohortCandidate {
                subject_id: "a".into(),
                ahi: Some(3.0),
                hypnogram: Some(good.clone()),
            },
            CohortCandidate {
                subject_id: "b".into(),
                ahi: Some(7.0),
                hypnogram: Some(good.clone()),
            },
            CohortCandidate {
                subject_id: "c".into(),
                ahi: None,
                hypnogram: Some(good),
            },
        ];
        let sel = select_cohort(&candidates, &SleepThresholds::default());
        assert_eq!(sel.kept.len(), 1);
        assert_eq!(sel.kept[0].0, "a");
        let decisions: Vec<_> = sel.report.iter().map(|r| r.decision).collect();
        assert_eq!(
            decisions,
            vec![
                CohortDecision::Kept,
                CohortDecision::ApneaExcluded,
                CohortDecision::MissingMetadata
            ]
        );
        assert!(select_cohort(&[], &SleepThresholds::default()).kept.is_empty());
    }

    #[test]
    fn split_arithmetic_and_partition() {
        let ids: Vec<String> = (0..417).map(|i| format!("s{i:03}")).collect();
        let (train, val) = split_subjects(&ids, 0.7, 42).unwrap();
        assert_eq!((train.len(), val.len()), (291, 126));
        let mut all: Vec<String> = train.iter().chain(&val).cloned().collect();
        all.sort();
        assert_eq!(all, ids);
        assert_eq!(split_subjects(&ids, 0.7, 42).unwrap(), (train, val));
        let ten: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        assert_eq!(split_subjects(&ten, 0.7, 1).unwrap().0.len(), 7);
    }

    #[test]
    fn split_errors() {
        assert_eq!(split_subjects(&[], 0.7, 0), Err(CohortError::EmptyList));
        let ids = vec!["a".to_string(), "a".to_string()];
        assert_eq!(split_subjects(&ids, 0.5, 0), Err(CohortError::DuplicateId("a".into())));
        assert!(split_subjects(&ids[..1], 1.0, 0).is_err());
    }
}
