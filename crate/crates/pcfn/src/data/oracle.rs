//! Analytical flow references: the Reynolds number and the classical
//! potential flow past a circular cylinder (uniform stream plus doublet,
//! pressure from Bernoulli). The velocity components are harmonic and the
//! pressure is consistent with steady momentum balance, so every residual
//! the auditors compute should vanish up to discretization error.

use super::{DataError, DataResult, GeometryMeta, PointCloud};

/// Free-stream and fluid constants shared by generation and normalization.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowConditions {
    /// Fluid density (kg/m^3).
    pub rho: f64,
    /// Free-stream speed along +x (m/s).
    pub u_inf: f64,
    /// Reference (atmospheric) pressure (Pa).
    pub p0: f64,
    /// Dynamic viscosity (Pa s); only enters residual formulas.
    pub mu: f64,
}

impl Default for FlowConditions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            u_inf: 1.0,
            p0: 0.0,
            mu: 0.05,
        }
    }
}

/// Re = rho * L * u_inf / mu.
pub fn reynolds(rho: f64, u_inf: f64, mu: f64, length: f64) -> DataResult<f64> {
    for (name, value) in [
        ("rho", rho),
        ("u_inf", u_inf),
        ("mu", mu),
        ("length", length),
    ] {
        if !(value > 0.0) {
            return Err(DataError::NonPositive { name, value });
        }
    }
    Ok(rho * length * u_inf / mu)
}

/// Velocity and Bernoulli pressure of potential flow past a circular
/// cylinder, evaluated at `points`. Every point must lie on or outside the
/// cylinder surface.
pub fn potential_flow_cylinder(
    center: [f64; 2],
    radius: f64,
    cond: &FlowConditions,
    points: &[[f64; 2]],
) -> DataResult<Vec<[f64; 3]>> {
    if !(radius > 0.0) {
        return Err(DataError::NonPositive {
            name: "radius",
            value: radius,
        });
    }
    let r2cyl = radius * radius;
    let mut out = Vec::with_capacity(points.len());
    for &p in points {
        let x = p[0] - center[0];
        let y = p[1] - center[1];
        let r2 = x * x + y * y;
        // Allow points on the surface up to rounding.
        if r2 < r2cyl * (1.0 - 1e-12) {
            return Err(DataError::PointInsideObject { x: p[0], y: p[1] });
        }
        let r4 = r2 * r2;
        let u = cond.u_inf * (1.0 + r2cyl * (y * y - x * x) / r4);
        let v = -2.0 * cond.u_inf * r2cyl * x * y / r4;
        let speed2 = u * u + v * v;
        let p = cond.p0 + 0.5 * cond.rho * (cond.u_inf * cond.u_inf - speed2);
        out.push([u, v, p]);
    }
    Ok(out)
}

/// Fills a cloud's fields from the oracle matching its geometry.
pub fn fill_oracle_fields(cloud: &mut PointCloud, cond: &FlowConditions) -> DataResult<()> {
    match cloud.meta {
        GeometryMeta::Circle { center, radius } => {
            cloud.fields = Some(potential_flow_cylinder(
                center,
                radius,
                cond,
                &cloud.coords,
            )?);
            Ok(())
        }
        GeometryMeta::Unknown => Err(DataError::InfeasibleGeometry {
            what: "oracle fields need a known geometry".into(),
        }),
    }
}
