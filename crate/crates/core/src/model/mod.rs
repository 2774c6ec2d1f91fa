//! Residual CNN classifier, its training loop, metrics and checkpoints.

mod block;
mod checkpoint;
mod gradcheck;
mod layers;
mod metrics;
mod network;
mod optim;
mod train;

pub use block::{BasicBlock, BlockConfig};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader, TensorEntry, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, GradSample};
pub use layers::{relu_backward, relu_inplace, Act, BatchNorm2d, Buffer, Conv2d, LayerNorm, Linear, Mat, Mode, Param, Visit};
pub use metrics::{macro_f1, mean_sd, Metrics};
pub use network::{argmax, softmax, softmax_cross_entropy, AuxConfig, Batch, Network, NetworkConfig, REFERENCE_PARAM_COUNT};
pub use optim::{cosine_lr, Adam, AdamConfig};
pub use train::{cross_validate, fit, fit_until, predict, CvReport, Dataset, FoldResult, TrainConfig, TrainHistory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad network shape: {0}")]
    BadShape(String),
    #[error("input shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation in forward pass")]
    NonFiniteActivation,
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("gradient mismatch on {} parameter(s): {}", .0.len(), .0.join(", "))]
    GradMismatch(Vec<String>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
