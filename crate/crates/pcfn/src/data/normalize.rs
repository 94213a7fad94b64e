//! Target normalization: non-dimensionalization by reference scales, then
//! min-max scaling to [0, 1] with stats frozen over the training split.
//! Both steps are linear and invert exactly; input coordinates are left in
//! physical units.

use serde::{Deserialize, Serialize};

use super::{DataError, DataResult, PointCloud};

/// Per-variable min/max of the dimensionless values over the training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarStats {
    pub min: f64,
    pub max: f64,
}

impl VarStats {
    fn check(&self, variable: &'static str) -> DataResult<()> {
        if !(self.max > self.min) {
            return Err(DataError::DegenerateStats { variable });
        }
        Ok(())
    }
}

/// Reference scales plus frozen min-max ranges; everything needed for an
/// exact round trip between physical and normalized targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub rho: f64,
    pub u_inf: f64,
    pub p0: f64,
    pub u: VarStats,
    pub v: VarStats,
    pub p: VarStats,
}

/// (u, v, p) -> (u/u_inf, v/u_inf, (p - p0) / (rho u_inf^2)).
pub fn nondimensionalize(
    fields: [f64; 3],
    rho: f64,
    u_inf: f64,
    p0: f64,
) -> DataResult<[f64; 3]> {
    if !(u_inf > 0.0) {
        return Err(DataError::NonPositive {
            name: "u_inf",
            value: u_inf,
        });
    }
    if !(rho > 0.0) {
        return Err(DataError::NonPositive {
            name: "rho",
            value: rho,
        });
    }
    Ok([
        fields[0] / u_inf,
        fields[1] / u_inf,
        (fields[2] - p0) / (rho * u_inf * u_inf),
    ])
}

/// phi' = (phi - min) / (max - min); no clamping, so values outside the
/// training range map outside [0, 1].
pub fn minmax_scale(value: f64, stats: &VarStats) -> f64 {
    (value - stats.min) / (stats.max - stats.min)
}

/// Exact inverse of `minmax_scale`.
pub fn minmax_unscale(value: f64, stats: &VarStats) -> f64 {
    stats.min + value * (stats.max - stats.min)
}

impl NormStats {
    /// Fits min-max ranges of the dimensionless targets over the given
    /// (training) clouds.
    pub fn fit(clouds: &[&PointCloud], rho: f64, u_inf: f64, p0: f64) -> DataResult<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut seen = false;
        for cloud in clouds {
            if let Some(fields) = &cloud.fields {
                for &f in fields {
                    let star = nondimensionalize(f, rho, u_inf, p0)?;
                    for k in 0..3 {
                        lo[k] = lo[k].min(star[k]);
                        hi[k] = hi[k].max(star[k]);
                    }
                    seen = true;
                }
            }
        }
        if !seen {
            return Err(DataError::Manifest {
                what: "no fields available to fit normalization stats".into(),
            });
        }
        let stats = Self {
            rho,
            u_inf,
            p0,
            u: VarStats {
                min: lo[0],
                max: hi[0],
            },
            v: VarStats {
                min: lo[1],
                max: hi[1],
            },
            p: VarStats {
                min: lo[2],
                max: hi[2],
            },
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> DataResult<()> {
        if !(self.rho > 0.0) {
            return Err(DataError::NonPositive {
                name: "rho",
                value: self.rho,
            });
        }
        if !(self.u_inf > 0.0) {
            return Err(DataError::NonPositive {
                name: "u_inf",
                value: self.u_inf,
            });
        }
        self.u.check("u")?;
        self.v.check("v")?;
        self.p.check("p")
    }

    /// Physical (u, v, p) -> normalized (u', v', p') in [0, 1] on the
    /// training range.
    pub fn normalize(&self, fields: [f64; 3]) -> [f64; 3] {
        let star = [
            fields[0] / self.u_inf,
            fields[1] / self.u_inf,
            (fields[2] - self.p0) / (self.rho * self.u_inf * self.u_inf),
        ];
        [
            minmax_scale(star[0], &self.u),
            minmax_scale(star[1], &self.v),
            minmax_scale(star[2], &self.p),
        ]
    }

    /// Exact inverse of `normalize`.
    pub fn denormalize(&self, scaled: [f64; 3]) -> [f64; 3] {
        let star = [
            minmax_unscale(scaled[0], &self.u),
            minmax_unscale(scaled[1], &self.v),
            minmax_unscale(scaled[2], &self.p),
        ];
        [
            star[0] * self.u_inf,
            star[1] * self.u_inf,
            self.p0 + star[2] * self.rho * self.u_inf * self.u_inf,
        ]
    }

    /// Per-channel (scale, shift) of the affine map from normalized network
    /// outputs to physical units.
    pub fn denorm_channels(&self) -> Vec<(f64, f64)> {
        let q = self.rho * self.u_inf * self.u_inf;
        vec![
            (
                self.u_inf * (self.u.max - self.u.min),
                self.u_inf * self.u.min,
            ),
            (
                self.u_inf * (self.v.max - self.v.min),
                self.u_inf * self.v.min,
            ),
            (q * (self.p.max - self.p.min), self.p0 + q * self.p.min),
        ]
    }
}
