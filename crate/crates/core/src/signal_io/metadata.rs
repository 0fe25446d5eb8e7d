//! Subject metadata: one JSON object per line.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

fn default_ecg_label() -> String {
    "ECG".into()
}

fn default_chest_label() -> String {
    "THOR RES".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub subject_id: String,
    #[serde(default)]
    pub ahi: Option<f64>,
    /// EDF file holding the ECG and respiration channels.
    pub edf_path: String,
    #[serde(default)]
    pub hypnogram_path: Option<String>,
    #[serde(default = "default_ecg_label")]
    pub ecg_label: String,
    #[serde(default = "default_chest_label")]
    pub chest_label: String,
    #[serde(default)]
    pub abdomen_label: Option<String>,
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("metadata line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("metadata line {line}: duplicate subject id `{id}`")]
    DuplicateId { line: usize, id: String },
}

/// Parse JSON-lines metadata. Blank lines are skipped.
pub fn read_subject_metadata(text: &str) -> Result<Vec<SubjectMeta>, MetadataError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let meta: SubjectMeta =
            serde_json::from_str(raw).map_err(|source| MetadataError::Json { line: idx + 1, source })?;
        if !seen.insert(meta.subject_id.clone()) {
            return Err(MetadataError::DuplicateId {
                line: idx + 1,
                id: meta.subject_id,
            });
        }
        out.push(meta);
    }
    Ok(out)
}

pub fn write_subject_metadata(subjects: &[SubjectMeta]) -> String {
    let mut out = String::new();
    for s in subjects {
        out.push_str(&serde_json::to_string(s).expect("metadata serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_channel_labels() {
        let subjects = read_subject_metadata(r#"{"subject_id":"s1","ahi":3.5,"edf_path":"s1.edf"}"#).unwrap();
        assert_eq!(subjects[0].ecg_label, "ECG");
        assert_eq!(subjects[0].chest_label, "THOR RES");
        assert_eq!(subjects[0].ahi, Some(3.5));
        assert_eq!(
            read_subject_metadata(&write_subject_metadata(&subjects)).unwrap(),
            subjects
        );
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = "{\"subject_id\":\"a\",\"edf_path\":\"x\"}\n\n{\"subject_id\":\"a\",\"edf_path\":\"y\"}";
        assert!(matches!(
            read_subject_metadata(text),
            Err(MetadataError::DuplicateId { line: 3, .. })
        ));
    }
}
