//! Feature-matrix CSV: header row of manifest names plus a trailing `stage`
//! column, then one row per epoch. Missing entries are written as `NA`,
//! unlabeled epochs as `?`.

use std::io::{Read, Write};

use thiserror::Error;

use super::hypnogram::{Stage, StageLabel};
use crate::feature_registry::{FeatureManifest, FeatureMatrix};

const STAGE_COLUMN: &str = "stage";
const MISSING: &str = "NA";
const UNLABELED: &str = "?";

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("feature matrix columns do not match the manifest: {0}")]
    ManifestMismatch(String),
    #[error("row {row}: {message}")]
    BadValue { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_feature_matrix<W: Write>(matrix: &FeatureMatrix, dest: W) -> Result<(), MatrixIoError> {
    let mut w = csv::WriterBuilder::new().from_writer(dest);
    let mut header: Vec<&str> = matrix.manifest.names().collect();
    header.push(STAGE_COLUMN);
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for e in 0..matrix.n_epochs() {
        record.clear();
        for j in 0..matrix.n_features() {
            if matrix.is_missing(e, j) {
                record.push(MISSING.to_string());
            } else {
                // `Display` for f64 is the shortest string that parses back exactly.
                record.push(matrix.value(e, j).to_string());
            }
        }
        record.push(match matrix.labels[e] {
            Some(s) => s.token().to_string(),
            None => UNLABELED.to_string(),
        });
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_matrix<R: Read>(source: R, manifest: &FeatureManifest) -> Result<FeatureMatrix, MatrixIoError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = r.headers()?.clone();
    let expected: Vec<&str> = manifest.names().chain(std::iter::once(STAGE_COLUMN)).collect();
    if header.len() != expected.len() {
        return Err(MatrixIoError::ManifestMismatch(format!(
            "{} columns, manifest needs {} features plus `{STAGE_COLUMN}`",
            header.len(),
            manifest.len()
        )));
    }
    if let Some((k, (got, want))) = header
        .iter()
        .zip(expected.iter())
        .enumerate()
        .find(|(_, (g, w))| g != *w)
    {
        return Err(MatrixIoError::ManifestMismatch(format!(
            "column {k} is `{got}`, manifest says `{want}`"
        )));
    }

    let n_features = manifest.len();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        for field in rec.iter().take(n_features) {
            if field == MISSING {
                values.push(f64::NAN);
                missing.push(true);
            } else {
                let v: f64 = field.parse().map_err(|_| MatrixIoError::BadValue {
                    row,
                    message: format!("`{field}` is not a number"),
                })?;
                values.push(v);
                missing.push(false);
            }
        }
        let stage = &rec[n_features];
        labels.push(if stage == UNLABELED {
            None
        } else {
            Some(Stage::from_token(stage).ok_or_else(|| MatrixIoError::BadValue {
                row,
                message: format!("unknown stage `{stage}`"),
            })?)
        });
    }
    Ok(FeatureMatrix::from_parts(manifest.clone(), values, missing, labels))
}
