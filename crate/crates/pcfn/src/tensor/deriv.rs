//! Derivatives of a point-wise field's outputs with respect to the input
//! coordinates.
//!
//! First order is exact: one reverse sweep per output channel, seeded with
//! that channel's indicator over all points. The gradient at point i then
//! collects every output's sensitivity to that point's position, which is
//! also what makes pooled (critical) points carry larger values. Second
//! order is a central difference of the exact first-order field along each
//! coordinate axis with step h = 1e-4 times the cloud's median neighbor
//! spacing.

use super::{NodeId, Scalar, Tape, Tensor, TensorError, TensorResult};

/// Something that maps an [N x dim] coordinate leaf to an [N x C] prediction
/// on the tape. Implemented by the network (infer mode) and by analytic maps
/// in tests.
pub trait CoordField {
    /// Number of coordinate columns the field consumes.
    fn dim(&self) -> usize;
    /// Record the evaluation on the tape. `coords` is a differentiable leaf.
    fn eval(&self, tape: &mut Tape<f64>, coords: NodeId) -> TensorResult<NodeId>;
}

/// Which derivative orders to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivOrder {
    First,
    Second,
}

/// Per-point derivatives, laid out as [point][channel][coordinate].
#[derive(Clone, Debug)]
pub struct InputDerivatives {
    pub n_points: usize,
    pub n_channels: usize,
    pub dim: usize,
    first: Vec<f64>,
    second: Option<Vec<f64>>,
}

impl InputDerivatives {
    /// d(out channel c) / d(coordinate k of point i).
    pub fn first(&self, i: usize, c: usize, k: usize) -> f64 {
        self.first[(i * self.n_channels + c) * self.dim + k]
    }

    /// Diagonal second derivative d^2(out channel c) / d(coordinate k)^2.
    pub fn second(&self, i: usize, c: usize, k: usize) -> f64 {
        self.second.as_ref().expect("second order not computed")
            [(i * self.n_channels + c) * self.dim + k]
    }

    pub fn has_second(&self) -> bool {
        self.second.is_some()
    }
}

/// Computes per-point derivatives of the field outputs with respect to the
/// input coordinates, first order exact and second order (when requested)
/// by central differences of the first-order field.
pub fn input_derivatives<F: CoordField>(
    field: &F,
    coords: &Tensor<f64>,
    order: DerivOrder,
) -> TensorResult<InputDerivatives> {
    let n = coords.rows();
    let dim = coords.cols();
    if dim != field.dim() {
        return Err(TensorError::ShapeMismatch {
            op: "input_derivatives",
            left: coords.shape().to_vec(),
            right: vec![field.dim()],
        });
    }
    let (first, n_channels) = first_order(field, coords)?;
    let second = match order {
        DerivOrder::First => None,
        DerivOrder::Second => {
            let h = 1e-4 * median_neighbor_spacing(coords).max(f64::MIN_POSITIVE);
            let mut sec = vec![0.0; n * n_channels * dim];
            for k in 0..dim {
                let shifted = |sign: f64| -> TensorResult<Vec<f64>> {
                    let mut data = coords.data().to_vec();
                    for i in 0..n {
                        data[i * dim + k] += sign * h;
                    }
                    let pert = Tensor::matrix(n, dim, data)?;
                    Ok(first_order(field, &pert)?.0)
                };
                let plus = shifted(1.0)?;
                let minus = shifted(-1.0)?;
                for i in 0..n {
                    for c in 0..n_channels {
                        let idx = (i * n_channels + c) * dim + k;
                        sec[idx] = (plus[idx] - minus[idx]) / (2.0 * h);
                    }
                }
            }
            Some(sec)
        }
    };
    Ok(InputDerivatives {
        n_points: n,
        n_channels,
        dim,
        first,
        second,
    })
}

/// One forward, one reverse sweep per output channel.
fn first_order<F: CoordField>(field: &F, coords: &Tensor<f64>) -> TensorResult<(Vec<f64>, usize)> {
    let n = coords.rows();
    let dim = coords.cols();
    let mut tape = Tape::new();
    let leaf = tape.leaf(coords.clone(), true);
    let pred = field.eval(&mut tape, leaf)?;
    let pred_rows = tape.val(pred).rows();
    let n_channels = tape.val(pred).cols();
    if pred_rows != n {
        return Err(TensorError::ShapeMismatch {
            op: "input_derivatives",
            left: vec![n, dim],
            right: tape.val(pred).shape().to_vec(),
        });
    }
    let mut out = vec![0.0; n * n_channels * dim];
    let mut seed = vec![0.0; n * n_channels];
    for c in 0..n_channels {
        for s in seed.iter_mut() {
            *s = 0.0;
        }
        for r in 0..n {
            seed[r * n_channels + c] = 1.0;
        }
        tape.backward_seeded(pred, &seed)?;
        let grad = tape
            .grad(leaf)
            .expect("coordinate leaf is marked differentiable");
        for i in 0..n {
            for k in 0..dim {
                out[(i * n_channels + c) * dim + k] = grad[i * dim + k];
            }
        }
    }
    Ok((out, n_channels))
}

/// Median nearest-neighbor distance of the cloud; the local spacing scale
/// used to size finite-difference steps.
pub fn median_neighbor_spacing<T: Scalar>(coords: &Tensor<T>) -> f64 {
    let n = coords.rows();
    let dim = coords.cols();
    if n < 2 {
        return 1.0;
    }
    let d = coords.data();
    let mut nearest = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::INFINITY;
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut dist2 = 0.0;
            for k in 0..dim {
                let diff = d[i * dim + k].to_f64() - d[j * dim + k].to_f64();
                dist2 += diff * diff;
            }
            if dist2 < best {
                best = dist2;
            }
        }
        nearest.push(best.sqrt());
    }
    nearest.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    nearest[n / 2]
}
