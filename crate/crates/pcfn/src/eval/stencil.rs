//! Connectivity-free derivative reconstruction: per interior point, a
//! weighted least-squares fit of monomials up to degree two over the k
//! nearest neighbors yields linear coefficients for first and diagonal
//! second derivatives, exact on quadratics by construction. Area weights
//! come from local spacing and are rescaled so their sum tracks the domain
//! area (convex hull minus object) when the geometry is known.

use rayon::prelude::*;

use super::{EvalError, EvalResult};
use crate::data::PointCloud;

/// Interior/boundary classification: a point is boundary when it sits on
/// the object surface or on the cloud's convex-hull rim, within
/// 1e-9 x (bounding-box diagonal).
#[derive(Clone, Debug)]
pub struct PointClass {
    pub boundary: Vec<bool>,
    pub on_surface: Vec<bool>,
    pub tolerance: f64,
}

impl PointClass {
    pub fn interior_indices(&self) -> Vec<usize> {
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, b)| !**b)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Indices of the convex hull of `points`, counter-clockwise (monotone
/// chain). Collinear edge points are kept so rim membership is complete.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<usize> {
    let n = points.len();
    if n < 3 {
        return (0..n).collect();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .partial_cmp(&points[b])
            .expect("finite coordinates")
    });
    let cross = |o: usize, a: usize, b: usize| -> f64 {
        (points[a][0] - points[o][0]) * (points[b][1] - points[o][1])
            - (points[a][1] - points[o][1]) * (points[b][0] - points[o][0])
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * n);
    for &p in &order {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) < 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in order.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) < 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = p[0] - (a[0] + t * ab[0]);
    let dy = p[1] - (a[1] + t * ab[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Classifies every point of the cloud.
pub fn classify_points(cloud: &PointCloud) -> PointClass {
    let n = cloud.len();
    let (lo, hi) = cloud.bbox();
    let diag = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let tol = 1e-9 * diag.max(f64::MIN_POSITIVE);

    let mut on_surface = vec![false; n];
    for (i, &p) in cloud.coords.iter().enumerate() {
        if let Some(d) = cloud.meta.surface_distance(p) {
            on_surface[i] = d.abs() <= tol;
        }
    }

    let hull = convex_hull(&cloud.coords);
    let mut boundary = on_surface.clone();
    for (i, &p) in cloud.coords.iter().enumerate() {
        if boundary[i] {
            continue;
        }
        for w in 0..hull.len() {
            let a = cloud.coords[hull[w]];
            let b = cloud.coords[hull[(w + 1) % hull.len()]];
            if segment_distance(p, a, b) <= tol {
                boundary[i] = true;
                break;
            }
        }
    }
    PointClass {
        boundary,
        on_surface,
        tolerance: tol,
    }
}

fn polygon_area(points: &[[f64; 2]], hull: &[usize]) -> f64 {
    let mut acc = 0.0;
    for w in 0..hull.len() {
        let a = points[hull[w]];
        let b = points[hull[(w + 1) % hull.len()]];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * acc.abs()
}

/// Derivative-reconstruction coefficients for one interior point. Each
/// derivative of a field f is the dot product of the coefficient row with
/// the field values at `neighbors` (the point itself comes first).
#[derive(Clone, Debug)]
pub struct Stencil {
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dyy: Vec<f64>,
    /// Area weight for integral accumulation.
    pub volume: f64,
}

impl Stencil {
    /// Applies one coefficient row to field values selected by `f`.
    pub fn apply(&self, coeffs: &[f64], f: impl Fn(usize) -> f64) -> f64 {
        coeffs
            .iter()
            .zip(&self.neighbors)
            .map(|(c, &j)| c * f(j))
            .sum()
    }
}

/// All interior stencils plus the classification they were built from.
#[derive(Clone, Debug)]
pub struct StencilSet {
    pub stencils: Vec<Stencil>,
    pub class: PointClass,
    pub total_volume: f64,
    /// Median nearest-neighbor spacing of the whole cloud.
    pub median_spacing: f64,
}

/// Builds quadratic WLS stencils over the k nearest neighbors of every
/// interior point. Rank-deficient neighborhoods grow k individually; the
/// hard cap is twice the requested k.
pub fn build_stencils(cloud: &PointCloud, k: usize) -> EvalResult<StencilSet> {
    if k < 6 {
        return Err(EvalError::StencilTooSmall { k });
    }
    let n = cloud.len();
    if n < k + 1 {
        return Err(EvalError::DegenerateCloud { points: n });
    }
    let class = classify_points(cloud);
    let interior = class.interior_indices();

    // Nearest-neighbor tables, reused for spacing and stencils.
    let neighbor_table: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dx = cloud.coords[j][0] - cloud.coords[i][0];
                    let dy = cloud.coords[j][1] - cloud.coords[i][1];
                    (dx * dx + dy * dy, j)
                })
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            d.truncate((2 * k).min(n - 1));
            d
        })
        .collect();

    let mut nearest: Vec<f64> = neighbor_table.iter().map(|t| t[0].0.sqrt()).collect();
    nearest.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_spacing = nearest[n / 2];

    let mut stencils: Vec<Stencil> = interior
        .par_iter()
        .map(|&i| build_one(cloud, &neighbor_table[i], i, k))
        .collect::<EvalResult<Vec<_>>>()?;

    // Rescale area weights so the total tracks the covered domain area:
    // hull area minus the object's cross section when the shape is known.
    let hull = convex_hull(&cloud.coords);
    if hull.len() >= 3 {
        let hull_area = polygon_area(&cloud.coords, &hull);
        let domain_area = hull_area - cloud.meta.area().unwrap_or(0.0);
        let raw: f64 = stencils.iter().map(|s| s.volume).sum();
        if raw > 0.0 && domain_area > 0.0 {
            let factor = domain_area / raw;
            for s in &mut stencils {
                s.volume *= factor;
            }
        }
    }
    let total_volume = stencils.iter().map(|s| s.volume).sum();
    Ok(StencilSet {
        stencils,
        class,
        total_volume,
        median_spacing,
    })
}

/// Quadratic basis in locally scaled offsets.
const BASIS: usize = 6;

fn build_one(
    cloud: &PointCloud,
    table: &[(f64, usize)],
    center: usize,
    k: usize,
) -> EvalResult<Stencil> {
    let cap = 2 * k;
    let mut use_k = k;
    loop {
        let take = use_k.min(table.len());
        let mut neighbors = Vec::with_capacity(take + 1);
        neighbors.push(center);
        neighbors.extend(table[..take].iter().map(|&(_, j)| j));
        if let Some(stencil) = try_wls(cloud, center, &neighbors, table, take) {
            return Ok(stencil);
        }
        if use_k >= cap || take == table.len() {
            return Err(EvalError::RankDeficient {
                point: center,
                tried_k: use_k,
            });
        }
        use_k = (use_k + 4).min(cap);
    }
}

fn try_wls(
    cloud: &PointCloud,
    center: usize,
    neighbors: &[usize],
    table: &[(f64, usize)],
    take: usize,
) -> Option<Stencil> {
    let m = neighbors.len();
    let cx = cloud.coords[center];
    let h = table[take - 1].0.sqrt(); // furthest used neighbor
    if !(h > 0.0) {
        return None;
    }
    // Rows of the design matrix and the weights.
    let mut a = vec![0.0; m * BASIS];
    let mut w = vec![0.0; m];
    for (r, &j) in neighbors.iter().enumerate() {
        let dx = (cloud.coords[j][0] - cx[0]) / h;
        let dy = (cloud.coords[j][1] - cx[1]) / h;
        let row = [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
        a[r * BASIS..(r + 1) * BASIS].copy_from_slice(&row);
        let r2 = dx * dx + dy * dy;
        w[r] = (-2.25 * r2).exp();
    }
    // Normal matrix S = A^T W A.
    let mut s = [[0.0f64; BASIS]; BASIS];
    for r in 0..m {
        for i in 0..BASIS {
            for j in i..BASIS {
                s[i][j] += w[r] * a[r * BASIS + i] * a[r * BASIS + j];
            }
        }
    }
    for i in 0..BASIS {
        for j in 0..i {
            s[i][j] = s[j][i];
        }
    }
    let chol = cholesky(&s)?;
    // Coefficient rows: solve S c = A^T W e_r per neighbor.
    let mut dx_c = vec![0.0; m];
    let mut dy_c = vec![0.0; m];
    let mut dxx_c = vec![0.0; m];
    let mut dyy_c = vec![0.0; m];
    for r in 0..m {
        let mut rhs = [0.0; BASIS];
        for i in 0..BASIS {
            rhs[i] = w[r] * a[r * BASIS + i];
        }
        let c = chol_solve(&chol, &rhs);
        // Scale back: monomials were in offsets / h.
        dx_c[r] = c[1] / h;
        dy_c[r] = c[2] / h;
        dxx_c[r] = 2.0 * c[3] / (h * h);
        dyy_c[r] = 2.0 * c[5] / (h * h);
    }
    // Local area proxy from the median used-neighbor distance.
    let mut dists: Vec<f64> = table[..take].iter().map(|&(d2, _)| d2.sqrt()).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dists[dists.len() / 2];
    let volume = std::f64::consts::PI * (median / 2.0) * (median / 2.0);

    Some(Stencil {
        center,
        neighbors: neighbors.to_vec(),
        dx: dx_c,
        dy: dy_c,
        dxx: dxx_c,
        dyy: dyy_c,
        volume,
    })
}

/// Lower-triangular Cholesky factor; None when the matrix is not positive
/// definite enough (rank-deficient neighborhood).
fn cholesky(s: &[[f64; BASIS]; BASIS]) -> Option<[[f64; BASIS]; BASIS]> {
    let mut l = [[0.0f64; BASIS]; BASIS];
    let floor = 1e-12 * (0..BASIS).map(|i| s[i][i]).fold(0.0, f64::max);
    for i in 0..BASIS {
        for j in 0..=i {
            let mut sum = s[i][j];
            for p in 0..j {
                sum -= l[i][p] * l[j][p];
            }
            if i == j {
                if sum <= floor {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[[f64; BASIS]; BASIS], rhs: &[f64; BASIS]) -> [f64; BASIS] {
    let mut y = [0.0; BASIS];
    for i in 0..BASIS {
        let mut sum = rhs[i];
        for p in 0..i {
            sum -= l[i][p] * y[p];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = [0.0; BASIS];
    for i in (0..BASIS).rev() {
        let mut sum = y[i];
        for p in i + 1..BASIS {
            sum -= l[p][i] * x[p];
        }
        x[i] = sum / l[i][i];
    }
    x
}
