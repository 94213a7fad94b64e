//! Point-cloud flow network: a PointNet-style per-point regressor for steady
//! incompressible flow fields, together with the machinery needed to train it
//! and to audit its predictions against conservation laws.
//!
//! The crate is organized by role:
//!
//! - [`tensor`]: dense tensors with reverse-mode automatic differentiation
//! - [`model`]: the segmentation network (T-Nets, shared MLPs, max pooling)
//! - [`data`]: analytical flow oracle, cloud sampling, normalization, file IO
//! - [`train`]: mean-squared-error loss, Adam, the fit loop, grid search
//! - [`eval`]: pointwise error metrics, meshless conservation residuals,
//!   network-gradient residuals, critical-point analysis

pub mod data;
pub mod eval;
pub mod model;
pub mod tensor;
pub mod train;
