//! Prediction auditing: pointwise error norms, meshless conservation
//! residuals over weighted-least-squares stencils, network-gradient
//! residuals split by critical/non-critical interior points, and
//! critical-point reporting.

use std::fmt;

use crate::data::DataError;
use crate::model::ModelError;
use crate::tensor::TensorError;

mod critical;
mod errors;
mod residuals;
mod stencil;

pub use critical::{critical_points, CriticalReport};
pub use errors::{pointwise_errors, ErrorReport, FieldErrors};
pub use residuals::{
    conservation_residuals, gradient_residuals, GradientResiduals, ResidualTriple,
};
pub use stencil::{build_stencils, classify_points, convex_hull, PointClass, Stencil, StencilSet};

pub type EvalResult<T> = Result<T, EvalError>;

#[derive(Debug)]
pub enum EvalError {
    /// The operation needs target or predicted fields that are absent.
    MissingFields,
    ShapeMismatch { what: String },
    /// A neighborhood stayed rank-deficient after growing to the k cap.
    RankDeficient { point: usize, tried_k: usize },
    /// Too few points for a convex hull / stencil construction.
    DegenerateCloud { points: usize },
    /// k below the quadratic-basis minimum.
    StencilTooSmall { k: usize },
    Model(ModelError),
    Tensor(TensorError),
    Data(DataError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingFields => write!(f, "operation requires per-point fields"),
            Self::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
            Self::RankDeficient { point, tried_k } => write!(
                f,
                "rank-deficient neighborhood at point {point} even with k = {tried_k}"
            ),
            Self::DegenerateCloud { points } => {
                write!(f, "cloud with {points} points is too small to audit")
            }
            Self::StencilTooSmall { k } => {
                write!(f, "quadratic stencils need k >= 6, got {k}")
            }
            Self::Model(e) => write!(f, "{e}"),
            Self::Tensor(e) => write!(f, "{e}"),
            Self::Data(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<ModelError> for EvalError {
    fn from(e: ModelError) -> Self {
        Self::Model(e)
    }
}
impl From<TensorError> for EvalError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}
impl From<DataError> for EvalError {
    fn from(e: DataError) -> Self {
        Self::Data(e)
    }
}
