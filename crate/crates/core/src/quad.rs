//! Adaptive Simpson quadrature with Richardson correction.

use crate::error::{Error, Result};

/// Absolute tolerance used for all integrals built into the crate.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 48;

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Returns [`Error::Quadrature`] when some panel cannot meet its share of the
/// tolerance within the depth limit. `a > b` yields the negated integral.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0;
    let panel = Panel { a, m, b, fa, fm, fb, whole };
    recurse(&f, panel, tol, MAX_DEPTH)
}

fn recurse<F>(f: &F, p: Panel, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let lm = 0.5 * (p.a + p.m);
    let rm = 0.5 * (p.m + p.b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (p.m - p.a) * (p.fa + 4.0 * flm + p.fm) / 6.0;
    let right = (p.b - p.m) * (p.fm + 4.0 * frm + p.fb) / 6.0;
    let both = left + right;
    let diff = both - p.whole;
    if !both.is_finite() {
        return Err(Error::Quadrature { a: p.a, b: p.b });
    }
    // Panels narrower than a few ulps cannot be refined further.
    let exhausted = (p.b - p.a) <= 8.0 * f64::EPSILON * p.a.abs().max(p.b.abs());
    if diff.abs() <= 15.0 * tol || exhausted {
        return Ok(both + diff / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature { a: p.a, b: p.b });
    }
    let l = Panel { a: p.a, m: lm, b: p.m, fa: p.fa, fm: flm, fb: p.fm, whole: left };
    let r = Panel { a: p.m, m: rm, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right };
    // Floor the split tolerance at the rounding level of the panel sum.
    let half = (0.5 * tol).max(4.0 * f64::EPSILON * both.abs());
    Ok(recurse(f, l, half, depth - 1)? + recurse(f, r, half, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-13);
        let v = adaptive_simpson(|x| x * x, 1.0, 4.0, 1e-12).unwrap();
        assert_relative_eq!(v, 21.0, epsilon = 1e-12);
    }

    #[test]
    fn reversed_limits_negate() {
        let v = adaptive_simpson(f64::exp, 1.0, 0.0, 1e-12).unwrap();
        assert_relative_eq!(v, -(1f64.exp() - 1.0), epsilon = 1e-11);
    }

    #[test]
    fn sqrt_endpoint_singularity_converges() {
        let v = adaptive_simpson(f64::sqrt, 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn nonintegrable_reports_failure() {
        let r = adaptive_simpson(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
