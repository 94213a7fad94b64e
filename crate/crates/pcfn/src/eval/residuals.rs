//! Conservation auditing of predicted fields.
//!
//! Two distinct probes: integrated residuals accumulate the steady
//! momentum/continuity imbalance over interior stencils with area weights
//! (absolute value of the weighted sum), while gradient residuals
//! differentiate the network itself with respect to input coordinates and
//! average per point over the critical and non-critical interior sets
//! separately (absolute value after averaging).

use super::stencil::StencilSet;
use super::{EvalError, EvalResult};
use crate::data::{NormStats, PointCloud};
use crate::model::{Model, ModelField};
use crate::tensor::{input_derivatives, DerivOrder, InputDerivatives, Tensor};

/// One residual per governing equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualTriple {
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub continuity: f64,
}

impl ResidualTriple {
    pub fn max_abs(&self) -> f64 {
        self.momentum_x
            .abs()
            .max(self.momentum_y.abs())
            .max(self.continuity.abs())
    }
}

/// Integrated residuals of the steady Navier-Stokes and continuity
/// equations over the interior stencils: |sum_i dV_i * R(p_i)| per equation.
pub fn conservation_residuals(
    cloud: &PointCloud,
    stencils: &StencilSet,
    rho: f64,
    mu: f64,
) -> EvalResult<ResidualTriple> {
    let fields = cloud.fields.as_ref().ok_or(EvalError::MissingFields)?;
    if fields.len() != cloud.len() {
        return Err(EvalError::ShapeMismatch {
            what: format!("{} field rows for {} points", fields.len(), cloud.len()),
        });
    }
    let u = |j: usize| fields[j][0];
    let v = |j: usize| fields[j][1];
    let p = |j: usize| fields[j][2];
    let mut mx = 0.0;
    let mut my = 0.0;
    let mut cont = 0.0;
    for s in &stencils.stencils {
        let i = s.center;
        let u_x = s.apply(&s.dx, u);
        let u_y = s.apply(&s.dy, u);
        let v_x = s.apply(&s.dx, v);
        let v_y = s.apply(&s.dy, v);
        let p_x = s.apply(&s.dx, p);
        let p_y = s.apply(&s.dy, p);
        let u_lap = s.apply(&s.dxx, u) + s.apply(&s.dyy, u);
        let v_lap = s.apply(&s.dxx, v) + s.apply(&s.dyy, v);
        mx += s.volume * (rho * (u(i) * u_x + v(i) * u_y) + p_x - mu * u_lap);
        my += s.volume * (rho * (u(i) * v_x + v(i) * v_y) + p_y - mu * v_lap);
        cont += s.volume * (u_x + v_y);
    }
    Ok(ResidualTriple {
        momentum_x: mx.abs(),
        momentum_y: my.abs(),
        continuity: cont.abs(),
    })
}

/// Gradient residuals split by pooling provenance.
#[derive(Clone, Debug)]
pub struct GradientResiduals {
    /// `None` when the set is empty (flagged, not an error).
    pub critical: Option<ResidualTriple>,
    pub non_critical: Option<ResidualTriple>,
    pub m_critical: usize,
    pub m_non_critical: usize,
    /// Indices: interior points that are critical / non-critical.
    pub critical_interior: Vec<usize>,
    pub non_critical_interior: Vec<usize>,
}

/// Differentiates the model's physical-unit predictions with respect to the
/// input coordinates and averages each equation's pointwise residual over
/// the critical-interior and non-critical-interior sets.
pub fn gradient_residuals(
    model: &Model<f64>,
    cloud: &PointCloud,
    norm: &NormStats,
    stencils: &StencilSet,
    mu: f64,
) -> EvalResult<GradientResiduals> {
    let n = cloud.len();
    let coords_data: Vec<f64> = cloud.coords.iter().flat_map(|p| [p[0], p[1]]).collect();
    let coords = Tensor::matrix(n, 2, coords_data)?;

    // Forward once for the critical set and physical predictions.
    let model_dim = model.config().input_dim;
    let infer_coords = if model_dim == 3 {
        let mut padded = Vec::with_capacity(n * 3);
        for p in &cloud.coords {
            padded.extend_from_slice(&[p[0], p[1], 0.0]);
        }
        Tensor::matrix(n, 3, padded)?
    } else {
        coords.clone()
    };
    let pass = model.forward_infer(&infer_coords, 1)?;
    let critical_set = &pass.latents[0].critical_set;
    let pred_norm = pass.predictions();
    let physical: Vec<[f64; 3]> = (0..n)
        .map(|i| norm.denormalize([pred_norm[i * 3], pred_norm[i * 3 + 1], pred_norm[i * 3 + 2]]))
        .collect();

    let field = ModelField::new(model).with_denorm(norm.denorm_channels());
    let derivs = input_derivatives(&field, &coords, DerivOrder::Second)?;

    let mut is_critical = vec![false; n];
    for &i in critical_set {
        is_critical[i] = true;
    }
    let interior = stencils.class.interior_indices();
    let critical_interior: Vec<usize> =
        interior.iter().copied().filter(|&i| is_critical[i]).collect();
    let non_critical_interior: Vec<usize> =
        interior.iter().copied().filter(|&i| !is_critical[i]).collect();

    let average = |set: &[usize]| -> Option<ResidualTriple> {
        if set.is_empty() {
            return None;
        }
        let m = set.len() as f64;
        let mut mx = 0.0;
        let mut my = 0.0;
        let mut cont = 0.0;
        for &i in set {
            let (r_mx, r_my, r_c) = pointwise_residual(&derivs, &physical, i, norm.rho, mu);
            mx += r_mx;
            my += r_my;
            cont += r_c;
        }
        Some(ResidualTriple {
            momentum_x: (mx / m).abs(),
            momentum_y: (my / m).abs(),
            continuity: (cont / m).abs(),
        })
    };

    Ok(GradientResiduals {
        critical: average(&critical_interior),
        non_critical: average(&non_critical_interior),
        m_critical: critical_interior.len(),
        m_non_critical: non_critical_interior.len(),
        critical_interior,
        non_critical_interior,
    })
}

fn pointwise_residual(
    derivs: &InputDerivatives,
    physical: &[[f64; 3]],
    i: usize,
    rho: f64,
    mu: f64,
) -> (f64, f64, f64) {
    let u = physical[i][0];
    let v = physical[i][1];
    let du = (derivs.first(i, 0, 0), derivs.first(i, 0, 1));
    let dv = (derivs.first(i, 1, 0), derivs.first(i, 1, 1));
    let dp = (derivs.first(i, 2, 0), derivs.first(i, 2, 1));
    let lap_u = derivs.second(i, 0, 0) + derivs.second(i, 0, 1);
    let lap_v = derivs.second(i, 1, 0) + derivs.second(i, 1, 1);
    let mx = rho * (u * du.0 + v * du.1) + dp.0 - mu * lap_u;
    let my = rho * (u * dv.0 + v * dv.1) + dp.1 - mu * lap_v;
    let cont = du.0 + dv.1;
    (mx, my, cont)
}
