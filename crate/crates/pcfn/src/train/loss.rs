//! The training objective: mean squared error over all entries, which for an
//! N x 3 sample is the 1/(3N)-weighted sum over the three normalized fields.
//! A stacked batch therefore averages the per-sample losses exactly.

use crate::tensor::{Scalar, Tensor, TensorError, TensorResult};

/// Scalar MSE of two equal-shape tensors.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> TensorResult<f64> {
    if pred.shape() != target.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "mse_loss",
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        });
    }
    Ok(mse_loss_slices(pred.data(), target.data()))
}

/// Slice form used by reports; panics on length mismatch.
pub fn mse_loss_slices<T: Scalar>(pred: &[T], target: &[T]) -> f64 {
    assert_eq!(pred.len(), target.len(), "mse operands must match");
    if pred.is_empty() {
        return 0.0;
    }
    let mut acc = T::ZERO;
    for (&p, &t) in pred.iter().zip(target) {
        let d = p - t;
        acc += d * d;
    }
    acc.to_f64() / pred.len() as f64
}
