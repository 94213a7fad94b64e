//! Finite-difference helpers shared by unit tests and the acceptance suite.

/// Componentwise relative error with the floor used throughout verification:
/// |a - b| / max(|a|, |b|, 1e-8).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Maximum componentwise relative error over two equal-length slices.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel-err operands must have equal length");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| rel_err(x, y))
        .fold(0.0, f64::max)
}

/// Central difference (f(x+h) - f(x-h)) / 2h of a scalar function of one
/// coordinate, with the other coordinates held by the closure.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Step size h = base * max(1, |x|) used for loss-level gradient checks.
pub fn fd_step(x: f64, base: f64) -> f64 {
    base * x.abs().max(1.0)
}

/// Central-difference check of one coordinate against an analytic gradient.
///
/// Runs at h = 1e-5 * max(1, |x|) first. When both the analytic value and the
/// difference quotient are at noise level, retries at a much larger step:
/// truly vanishing derivatives (e.g. a bias feeding batch norm, which cancels
/// any channel shift exactly) otherwise leave rounding noise that the 1e-8
/// error floor cannot absorb. Returns (ok, fd_estimate, rel_error).
pub fn fd_matches<F: FnMut(f64) -> f64>(
    mut f: F,
    x: f64,
    analytic: f64,
    tol: f64,
) -> (bool, f64, f64) {
    let h1 = fd_step(x, 1e-5);
    let fd1 = central_diff(&mut f, x, h1);
    let re1 = rel_err(analytic, fd1);
    if re1 < tol {
        return (true, fd1, re1);
    }
    if analytic.abs().max(fd1.abs()) < 1e-7 {
        let h2 = fd_step(x, 1e-2);
        let fd2 = central_diff(&mut f, x, h2);
        let re2 = rel_err(analytic, fd2);
        return (re2 < tol, fd2, re2);
    }
    (false, fd1, re1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_diff_matches_polynomial_derivative() {
        let d = central_diff(|x| x * x * x, 2.0, 1e-5);
        assert!(rel_err(d, 12.0) < 1e-8);
    }

    #[test]
    fn rel_err_floors_small_denominators() {
        assert_eq!(rel_err(0.0, 0.0), 0.0);
        assert!(rel_err(1e-12, 0.0) < 1e-3);
    }
}
