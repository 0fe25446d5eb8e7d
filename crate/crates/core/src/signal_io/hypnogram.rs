//! Stage labels and the one-token-per-line hypnogram text format.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    SixClass,
    FourClass,
}

/// A sleep-stage label belonging to one scoring scheme.
pub trait StageLabel: Copy + Eq + fmt::Debug + Send + Sync + 'static {
    const SCHEME: Scheme;
    fn token(self) -> &'static str;
    fn from_token(token: &str) -> Option<Self>;
}

/// Rechtschaffen & Kales stages as scored in SHHS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SixStage {
    Wake,
    S1,
    S2,
    S3,
    S4,
    Rem,
}

impl StageLabel for SixStage {
    const SCHEME: Scheme = Scheme::SixClass;

    fn token(self) -> &'static str {
        match self {
            SixStage::Wake => "W",
            SixStage::S1 => "1",
            SixStage::S2 => "2",
            SixStage::S3 => "3",
            SixStage::S4 => "4",
            SixStage::Rem => "R",
        }
    }

    fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "W" => SixStage::Wake,
            "1" => SixStage::S1,
            "2" => SixStage::S2,
            "3" => SixStage::S3,
            "4" => SixStage::S4,
            "R" => SixStage::Rem,
            _ => return None,
        })
    }
}

/// The four classes predicted by the model, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Wake = 0,
    Light = 1,
    Deep = 2,
    Rem = 3,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Wake, Stage::Light, Stage::Deep, Stage::Rem];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::ALL.get(i).copied()
    }
}

impl StageLabel for Stage {
    const SCHEME: Scheme = Scheme::FourClass;

    fn token(self) -> &'static str {
        match self {
            Stage::Wake => "WAKE",
            Stage::Light => "LIGHT",
            Stage::Deep => "DEEP",
            Stage::Rem => "REM",
        }
    }

    fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "WAKE" => Stage::Wake,
            "LIGHT" => Stage::Light,
            "DEEP" => Stage::Deep,
            "REM" => Stage::Rem,
            _ => return None,
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Per-epoch stage labels in a single scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypnogram<S> {
    pub epoch_len_s: f64,
    pub labels: Vec<S>,
}

impl<S: StageLabel> Hypnogram<S> {
    pub fn new(epoch_len_s: f64, labels: Vec<S>) -> Self {
        Self { epoch_len_s, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn scheme(&self) -> Scheme {
        S::SCHEME
    }
}

/// A hypnogram whose scheme is only known at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyHypnogram {
    Six(Hypnogram<SixStage>),
    Four(Hypnogram<Stage>),
}

impl AnyHypnogram {
    pub fn len(&self) -> usize {
        match self {
            AnyHypnogram::Six(h) => h.len(),
            AnyHypnogram::Four(h) => h.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            AnyHypnogram::Six(_) => Scheme::SixClass,
            AnyHypnogram::Four(_) => Scheme::FourClass,
        }
    }

    /// Four-class view, merging six-class stages when needed.
    pub fn to_four_class(&self) -> Hypnogram<Stage> {
        match self {
            AnyHypnogram::Six(h) => crate::cohort::merge_stages(h),
            AnyHypnogram::Four(h) => h.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypnogramError {
    #[error("line {line}: unknown stage token `{token}`")]
    UnknownToken { line: usize, token: String },
    #[error("line {line}: token `{token}` belongs to a different scheme than line 1")]
    MixedScheme { line: usize, token: String },
    #[error("epoch length must be positive, got {0}")]
    InvalidEpochLength(f64),
}

/// Parse one stage token per line. The scheme is fixed by the first line;
/// an empty text yields an empty four-class hypnogram.
pub fn read_hypnogram(text: &str, epoch_len_s: f64) -> Result<AnyHypnogram, HypnogramError> {
    if !(epoch_len_s > 0.0) {
        return Err(HypnogramError::InvalidEpochLength(epoch_len_s));
    }
    let mut six = Vec::new();
    let mut four = Vec::new();
    let mut scheme = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let token = raw.trim();
        let parsed = match (SixStage::from_token(token), Stage::from_token(token)) {
            (Some(s), _) => (Scheme::SixClass, Some(s), None),
            (None, Some(s)) => (Scheme::FourClass, None, Some(s)),
            (None, None) => {
                return Err(HypnogramError::UnknownToken {
                    line,
                    token: token.to_string(),
                })
            }
        };
        match scheme {
            None => scheme = Some(parsed.0),
            Some(s) if s != parsed.0 => {
                return Err(HypnogramError::MixedScheme {
                    line,
                    token: token.to_string(),
                })
            }
            _ => {}
        }
        if let Some(s) = parsed.1 {
            six.push(s);
        }
        if let Some(s) = parsed.2 {
            four.push(s);
        }
    }
    Ok(match scheme {
        Some(Scheme::SixClass) => AnyHypnogram::Six(Hypnogram::new(epoch_len_s, six)),
        _ => AnyHypnogram::Four(Hypnogram::new(epoch_len_s, four)),
    })
}

pub fn write_hypnogram<S: StageLabel>(hypnogram: &Hypnogram<S>) -> String {
    let mut out = String::with_capacity(hypnogram.len() * 6);
    for s in &hypnogram.labels {
        out.push_str(s.token());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_class_tokens() {
        let h = read_hypnogram("W\n1\n2\nR", 30.0).unwrap();
        assert_eq!(
            h,
            AnyHypnogram::Six(Hypnogram::new(
                30.0,
                vec![SixStage::Wake, SixStage::S1, SixStage::S2, SixStage::Rem]
            ))
        );
    }

    #[test]
    fn empty_text_is_empty_hypnogram() {
        let h = read_hypnogram("", 30.0).unwrap();
        assert_eq!(h.len(), 0);
    }

    #[test]
    fn mixed_scheme_is_rejected() {
        assert_eq!(
            read_hypnogram("W\nLIGHT", 30.0),
            Err(HypnogramError::MixedScheme {
                line: 2,
                token: "LIGHT".into()
            })
        );
    }

    #[test]
    fn unknown_token_reports_line() {
        assert_eq!(
            read_hypnogram("WAKE\nREM\nN3\n", 30.0),
            Err(HypnogramError::UnknownToken {
                line: 3,
                token: "N3".into()
            })
        );
    }

    #[test]
    fn four_class_round_trip() {
        let h = Hypnogram::new(30.0, vec![Stage::Wake, Stage::Deep, Stage::Rem, Stage::Light]);
        let text = write_hypnogram(&h);
        assert_eq!(read_hypnogram(&text, 30.0).unwrap(), AnyHypnogram::Four(h));
    }
}
