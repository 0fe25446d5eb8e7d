use rayon::prelude::*;

use super::{FeatureManifest, FeatureMatrix, Profile, RegistryError, Source};
use crate::epoching::{window_sample_range, window_samples, EpochGrid, EpochWindow, EpochedRr};
use crate::features_resp_cpc::{breath_features, cpc_band_features, cpc_spectrum};
use crate::features_rr::{
    hrv_time_features, nonlinear_features, novel_f1, novel_f2, novel_f3, rr_freq_features, statistical_features,
};
use crate::preprocess::RrSeries;
use crate::signal_io::{SignalTrace, Stage};

/// Subjects with more missing entries than this fraction are rejected.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

/// Preprocessed signals of one subject.
#[derive(Debug, Clone, Copy)]
pub struct FeatureInputs<'a> {
    pub grid: &'a EpochGrid,
    pub rr: &'a RrSeries,
    /// Cleaned chest breathing.
    pub chest: &'a SignalTrace,
    /// Cleaned abdominal breathing, needed by the two-channel profile.
    pub abdomen: Option<&'a SignalTrace>,
    pub labels: Option<&'a [Stage]>,
}

fn opt<const N: usize>(r: Result<[Option<f64>; N], impl Sized>) -> Vec<Option<f64>> {
    match r {
        Ok(v) => v.to_vec(),
        Err(_) => vec![None; N],
    }
}

fn group_values(source: Source, w: &EpochWindow, inputs: &FeatureInputs<'_>, epoched: &EpochedRr) -> Vec<Option<f64>> {
    let rr = epoched.window_values(w);
    match source {
        Source::RrHrv => opt(hrv_time_features(rr)),
        Source::RrStat => opt(statistical_features(rr)),
        Source::RrNonlinear => opt(nonlinear_features(rr)),
        Source::RrNovel => {
            let epochs: Vec<&[f64]> = epoched.window_epochs(w).collect();
            let mid = w.center - w.first;
            vec![
                novel_f1(&epochs, mid).ok(),
                novel_f2(&epochs, mid).ok(),
                novel_f3(&epochs).ok(),
            ]
        }
        Source::RrFreq => opt(rr_freq_features(epoched.window_times(w), rr)),
        Source::BreathChest | Source::BreathAbdomen => {
            let trace = if source == Source::BreathChest {
                inputs.chest
            } else {
                inputs.abdomen.expect("checked before assembly")
            };
            opt(breath_features(
                window_samples(trace, inputs.grid, w),
                trace.sample_rate_hz,
            ))
        }
        Source::Cpc => {
            let chest = inputs.chest;
            let range = window_sample_range(chest, inputs.grid, w);
            let start = chest.time_of(range.start);
            let spectrum = cpc_spectrum(
                epoched.window_times(w),
                rr,
                &chest.samples[range],
                chest.sample_rate_hz,
                start,
                w.span_s(inputs.grid),
            );
            match spectrum {
                Ok(s) => cpc_band_features(&s).to_vec(),
                Err(_) => vec![None; 6],
            }
        }
    }
}

/// Evaluates every manifest entry with its window centered on each epoch.
/// Undefined values are masked; more than half the entries missing is an
/// error.
pub fn assemble_feature_matrix(
    manifest: &FeatureManifest,
    inputs: &FeatureInputs<'_>,
) -> Result<FeatureMatrix, RegistryError> {
    if manifest.profile() == Profile::TwoChannel && inputs.abdomen.is_none() {
        return Err(RegistryError::MissingChannel("abdominal breathing".into()));
    }
    let n_epochs = inputs.grid.n_epochs;
    if let Some(l) = inputs.labels {
        if l.len() != n_epochs {
            return Err(RegistryError::LabelLength(l.len(), n_epochs));
        }
    }
    let epoched = EpochedRr::new(inputs.rr, inputs.grid);
    let groups = manifest.groups();
    let k = manifest.len();
    let rows: Vec<Vec<f64>> = (0..n_epochs)
        .into_par_iter()
        .map(|e| {
            let computed: Vec<Vec<Option<f64>>> = groups
                .iter()
                .map(|&(source, n)| {
                    let w = inputs.grid.window(e, n).expect("manifest windows are odd");
                    group_values(source, &w, inputs, &epoched)
                })
                .collect();
            manifest
                .entries()
                .iter()
                .map(|entry| {
                    let g = groups
                        .binary_search(&(entry.source, entry.window))
                        .expect("group listed");
                    computed[g][entry.index].filter(|v| v.is_finite()).unwrap_or(f64::NAN)
                })
                .collect()
        })
        .collect();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let missing: Vec<bool> = values.iter().map(|v| v.is_nan()).collect();
    let n_missing = missing.iter().filter(|m| **m).count();
    let total = n_epochs * k;
    if n_missing as f64 > MAX_MISSING_FRACTION * total as f64 {
        return Err(RegistryError::SubjectUnusable {
            missing: n_missing,
            total,
        });
    }
    let labels = match inputs.labels {
        Some(l) => l.iter().map(|s| Some(*s)).collect(),
        None => vec![None; n_epochs],
    };
    Ok(FeatureMatrix::from_parts(manifest.clone(), values, missing, labels))
}
