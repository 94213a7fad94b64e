//! Pointwise error metrics between predicted and true fields, in the three
//! norm variants a reader might mean: plain Euclidean over the points
//! (headline), root-mean-square, and Euclidean relative to the truth norm.

use super::{EvalError, EvalResult};
use crate::data::PointCloud;

/// Norms of one field's error vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldErrors {
    /// sqrt(sum_i (a_i - b_i)^2) over the N points (headline variant).
    pub euclidean: f64,
    /// sqrt(mean_i (a_i - b_i)^2).
    pub rms: f64,
    /// euclidean / ||truth||; `None` when the truth norm vanishes.
    pub relative: Option<f64>,
}

/// Per-field norms plus the per-point absolute error map.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub u: FieldErrors,
    pub v: FieldErrors,
    pub p: FieldErrors,
    /// |error| per point and channel, for map output.
    pub per_point_abs: Vec<[f64; 3]>,
}

impl ErrorReport {
    pub fn field(&self, channel: usize) -> &FieldErrors {
        match channel {
            0 => &self.u,
            1 => &self.v,
            _ => &self.p,
        }
    }
}

fn field_errors(truth: &[f64], pred: &[f64]) -> FieldErrors {
    let n = truth.len().max(1);
    let mut sq = 0.0;
    let mut truth_sq = 0.0;
    for (&t, &q) in truth.iter().zip(pred) {
        sq += (t - q) * (t - q);
        truth_sq += t * t;
    }
    let euclidean = sq.sqrt();
    FieldErrors {
        euclidean,
        rms: (sq / n as f64).sqrt(),
        relative: if truth_sq > 0.0 {
            Some(euclidean / truth_sq.sqrt())
        } else {
            None
        },
    }
}

/// Compares predictions (physical units, N x 3 row-major) against the
/// cloud's target fields.
pub fn pointwise_errors(truth: &PointCloud, pred: &[f64]) -> EvalResult<ErrorReport> {
    let fields = truth.fields.as_ref().ok_or(EvalError::MissingFields)?;
    if pred.len() != truth.len() * 3 {
        return Err(EvalError::ShapeMismatch {
            what: format!(
                "predictions hold {} values, cloud needs {}",
                pred.len(),
                truth.len() * 3
            ),
        });
    }
    let n = truth.len();
    let mut per_point_abs = Vec::with_capacity(n);
    let mut truth_cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut pred_cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let mut abs = [0.0; 3];
        for c in 0..3 {
            let t = fields[i][c];
            let q = pred[i * 3 + c];
            abs[c] = (t - q).abs();
            truth_cols[c].push(t);
            pred_cols[c].push(q);
        }
        per_point_abs.push(abs);
    }
    Ok(ErrorReport {
        u: field_errors(&truth_cols[0], &pred_cols[0]),
        v: field_errors(&truth_cols[1], &pred_cols[1]),
        p: field_errors(&truth_cols[2], &pred_cols[2]),
        per_point_abs,
    })
}
