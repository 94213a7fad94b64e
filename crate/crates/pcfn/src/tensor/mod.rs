//! Dense tensors with reverse-mode automatic differentiation.
//!
//! The engine is deliberately small: contiguous row-major storage, a linear
//! tape of recorded primitives, and exactly the operations the network and
//! the residual auditors need. 64-bit arithmetic is used on verification
//! paths; 32-bit is available for training throughput.

use std::fmt;

mod deriv;
mod gradcheck;
mod tape;

pub use deriv::{
    input_derivatives, median_neighbor_spacing, CoordField, DerivOrder, InputDerivatives,
};
pub use gradcheck::{central_diff, fd_matches, fd_step, max_rel_err, rel_err};
pub use tape::{Mode, NodeId, Tape};

/// Result alias used throughout the tensor module.
pub type TensorResult<T> = Result<T, TensorError>;

/// Errors emitted by tensor primitives and the tape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TensorError {
    /// Operand shapes do not agree for the named operation.
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// Data length does not match the product of the shape.
    DataLength { expected: usize, got: usize },
    /// Batch normalization in train mode needs at least two rows.
    DegenerateBatch { rows: usize },
    /// Backward was started from a non-scalar node.
    NonScalarRoot { shape: Vec<usize> },
    /// Max pooling over an empty point dimension.
    EmptyPool,
    /// Input derivatives requested while batch norm is in train mode.
    TrainModeDerivatives,
    /// A primitive produced a non-finite value from finite inputs.
    NonFinite { op: &'static str },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { op, left, right } => {
                write!(f, "{op}: shape mismatch, left={left:?} right={right:?}")
            }
            Self::DataLength { expected, got } => {
                write!(f, "data length {got} does not match shape product {expected}")
            }
            Self::DegenerateBatch { rows } => {
                write!(f, "batch norm in train mode needs >= 2 rows, got {rows}")
            }
            Self::NonScalarRoot { shape } => {
                write!(f, "backward root must be scalar, got shape {shape:?}")
            }
            Self::EmptyPool => write!(f, "max pool over empty point dimension"),
            Self::TrainModeDerivatives => write!(
                f,
                "input derivatives require frozen batch-norm statistics (infer mode)"
            ),
            Self::NonFinite { op } => write!(f, "{op}: produced a non-finite value"),
        }
    }
}

impl std::error::Error for TensorError {}

/// Floating-point element type of tensors; implemented for `f32` and `f64`.
pub trait Scalar:
    Copy
    + PartialOrd
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    /// c[m x n] += alpha * a[m x k] * b[k x n] + beta-scaled c, with explicit strides.
    ///
    /// # Safety
    /// Pointers must cover the strided extents, as in `matrixmultiply`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Contiguous row-major tensor value.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> TensorResult<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![T::ZERO; n],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    /// 2-D helper: `rows x cols` from a flat row-major vector.
    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> TensorResult<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.iter().all(|&d| d == 1)
    }

    /// Rows of a 2-D tensor (1 for scalars/vectors treated as a single row).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    /// Trailing dimension (columns for 2-D, length for 1-D).
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => 1,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_checks_data_length() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        let err = Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert_eq!(
            err,
            TensorError::DataLength {
                expected: 6,
                got: 5
            }
        );
    }

    #[test]
    fn scalar_roundtrip_f32() {
        let x = f32::from_f64(0.25);
        assert_eq!(x.to_f64(), 0.25);
    }
}
