//! Stacked bidirectional LSTM sequence labeler with a softmax output layer,
//! trained by full backpropagation through time.
//!
//! One sequence is one subject-night: a `T × input` row-major feature block
//! and `T` optional class labels. Unlabeled steps are ignored by the loss.

mod checkpoint;
mod network;
mod params;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use network::{forward, loss_and_gradients, predict, sequence_loss, Sequence};
pub use params::{init_params, Block, BlstmDims, BlstmParams};
pub use train::{class_weights_from_labels, train, EpochRecord, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input at step {step}, feature {feature}")]
    NonFiniteInput { step: usize, feature: usize },
    #[error("non-finite loss at optimizer step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("no labeled training sequences")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint was trained for manifest {found}, expected {expected}")]
    ManifestMismatch { expected: String, found: String },
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
