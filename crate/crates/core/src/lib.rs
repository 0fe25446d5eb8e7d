//! Sleep staging from single-lead ECG and respiratory effort.
//!
//! The pipeline turns raw recordings into four-class (Wake / Light / Deep / REM)
//! per-epoch predictions:
//!
//! 1. [`signal_io`] parses EDF recordings, hypnograms and interchange files.
//! 2. [`preprocess`] extracts RR intervals and cleans the breathing traces.
//! 3. [`epoching`] lays the 30 s epoch grid and odd-width sliding windows.
//! 4. [`features_rr`], [`features_resp_cpc`] compute per-epoch features which
//!    [`feature_registry`] assembles into the 152-column matrix and Z-scores.
//! 5. [`model_blstm`] is a two-layer bidirectional LSTM sequence labeler.
//! 6. [`eval_report`] scores predictions (accuracy, Cohen's kappa, CDFs).
//!
//! [`cohort`] implements subject selection and splitting, [`synth_oracle`]
//! generates synthetic subjects with known stages, and [`pipeline`] glues the
//! stages together for the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cohort;
pub mod epoching;
pub mod eval_report;
pub mod feature_registry;
pub mod features_resp_cpc;
pub mod features_rr;
pub mod model_blstm;
pub mod pipeline;
pub mod preprocess;
pub mod signal_io;
pub mod spectrum;
pub mod stats;
pub mod synth_oracle;

pub use signal_io::{Hypnogram, SignalTrace, SixStage, Stage};
