//! The point-cloud segmentation regressor: input/feature T-Nets, shared
//! MLPs, global-feature max pooling, per-point concatenation, and a
//! sigmoid-bounded regression head.

use std::fmt;

use crate::tensor::TensorError;

mod checkpoint;
mod config;
mod net;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC};
pub use config::ModelConfig;
pub use net::{stack_coords, ForwardPass, Grads, LatentRecord, Model, ModelField, TnetStage};
pub use params::{parameter_count, ParamEntry, ParamKind};

pub type ModelResult<T> = Result<T, ModelError>;

/// Errors from model construction, evaluation and checkpoint IO.
#[derive(Debug)]
pub enum ModelError {
    /// Configuration violates an architectural constraint.
    Config { what: String },
    /// A tensor primitive failed underneath the network.
    Tensor(TensorError),
    Io(std::io::Error),
    BadMagic { got: [u8; 4] },
    BadVersion { got: u32 },
    /// File length disagrees with what the header implies.
    LengthMismatch { expected: u64, got: u64 },
    /// Metadata block failed to parse.
    Meta { what: String },
    /// Cloud size does not match the configured point count (train mode).
    WrongPointCount { expected: usize, got: usize },
    /// Cloud dimension does not match the configured input dimension.
    WrongDim { expected: usize, got: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { what } => write!(f, "invalid model config: {what}"),
            Self::Tensor(e) => write!(f, "tensor error: {e}"),
            Self::Io(e) => write!(f, "checkpoint io error: {e}"),
            Self::BadMagic { got } => write!(f, "bad checkpoint magic {got:?}"),
            Self::BadVersion { got } => write!(f, "unsupported checkpoint version {got}"),
            Self::LengthMismatch { expected, got } => {
                write!(f, "checkpoint length {got} does not match expected {expected}")
            }
            Self::Meta { what } => write!(f, "bad checkpoint metadata: {what}"),
            Self::WrongPointCount { expected, got } => {
                write!(f, "cloud has {got} points, model expects {expected}")
            }
            Self::WrongDim { expected, got } => {
                write!(f, "cloud dimension {got}, model expects {expected}")
            }
        }
    }
}

impl std::error::Error for ModelError {}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
