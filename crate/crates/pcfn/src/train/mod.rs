//! Minibatch training with Adam, validation tracking, and the grid-search
//! harness over (global feature size, batch size).

use std::fmt;

use crate::data::DataError;
use crate::model::ModelError;
use crate::tensor::TensorError;

mod adam;
mod fit;
mod grid;
mod loss;

pub use adam::AdamState;
pub use fit::{evaluate_loss, fit, EpochStat, FitOutput, TrainingReport};
pub use grid::{estimate_cell_bytes, grid_search, CellOutcome, GridCell, GridSpec};
pub use loss::{mse_loss, mse_loss_slices};

pub type TrainResult<T> = Result<T, TrainError>;

/// Optimization hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Added to the square-rooted second moment in the update denominator.
    pub eps_hat: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-6,
            batch_size: 8,
            epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> TrainResult<()> {
        let fail = |what: String| Err(TrainError::Config { what });
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return fail(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.eps_hat > 0.0) {
            return fail(format!("eps_hat must be positive, got {}", self.eps_hat));
        }
        if self.batch_size < 2 {
            return fail(format!(
                "batch_size must be >= 2 for batch norm, got {}",
                self.batch_size
            ));
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        Ok(())
    }
}

/// Errors from the optimizer and the fit loop.
#[derive(Debug)]
pub enum TrainError {
    Config { what: String },
    /// A gradient turned non-finite; names the offending registry entry.
    NanGradient { layer: String },
    /// The loss turned non-finite; reports the last epoch that was healthy.
    Divergence { epoch: usize, last_good: Option<usize> },
    /// Training set smaller than one batch, or shape trouble in the data.
    Dataset { what: String },
    Model(ModelError),
    Tensor(TensorError),
    Data(DataError),
    Io(std::io::Error),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { what } => write!(f, "invalid train config: {what}"),
            Self::NanGradient { layer } => {
                write!(f, "non-finite gradient in `{layer}`; aborting step")
            }
            Self::Divergence { epoch, last_good } => match last_good {
                Some(g) => write!(f, "loss diverged at epoch {epoch}; last good epoch {g}"),
                None => write!(f, "loss diverged at epoch {epoch}"),
            },
            Self::Dataset { what } => write!(f, "dataset error: {what}"),
            Self::Model(e) => write!(f, "{e}"),
            Self::Tensor(e) => write!(f, "{e}"),
            Self::Data(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}
impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}
impl From<DataError> for TrainError {
    fn from(e: DataError) -> Self {
        Self::Data(e)
    }
}
impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
