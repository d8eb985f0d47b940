//! Five-point residual `R = −Δ_h u − f(u)` on the graded mesh.

use super::{Field, Mesh, VerticalStencil};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

/// Coefficients of `−Δ_h` at one node: `diag·u − Σ w·neighbour`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub diag: f64,
    pub below: f64,
    pub above: f64,
    pub side: f64,
}

/// Standard vertical weights at row `j`, scaled by `theta`.
pub(crate) fn stencil(mesh: &Mesh, j: usize, theta: f64) -> Stencil {
    let hm = mesh.y[j] - mesh.y[j - 1];
    let hp = mesh.y[j + 1] - mesh.y[j];
    let hx = mesh.hx();
    let side = 1.0 / (hx * hx);
    Stencil {
        diag: theta * 2.0 / (hm * hp) + 2.0 * side,
        below: theta * 2.0 / (hm * (hm + hp)),
        above: theta * 2.0 / (hp * (hm + hp)),
        side,
    }
}

/// Per-row factor `θ_j` multiplying the standard vertical second difference;
/// index `j` runs over all rows, boundary rows carry 1.
///
/// For [`VerticalStencil::PowerFitted`], `θ_j = p″(y_j) / Δ_y p(y_j)` with
/// `p = y^(2/(γ+1))`, which makes the operator exact on the boundary power
/// law. Any three-point stencil exact on constants and linear functions is
/// a multiple of the standard one, so this is the unique such fit.
pub fn vertical_weights(mesh: &Mesh, spec: &NonlinearitySpec, stencil: VerticalStencil) -> Vec<f64> {
    let n = mesh.y.len();
    let mut theta = vec![1.0; n];
    let Some(a) = fitted_exponent(spec, stencil) else {
        return theta;
    };
    let y = &mesh.y;
    for j in 1..n - 1 {
        theta[j] = fitted_theta(y[j - 1], y[j], y[j + 1], a);
    }
    theta
}

/// Exponent the vertical stencil is fitted to, if any.
pub(crate) fn fitted_exponent(spec: &NonlinearitySpec, stencil: VerticalStencil) -> Option<f64> {
    let gamma = spec.gamma();
    (stencil == VerticalStencil::PowerFitted && gamma > 1.0 && spec.c_sing() > 0.0).then(|| 2.0 / (gamma + 1.0))
}

/// Factor making the standard three-point second difference on
/// `ym < y < yp` exact for `t^a`; 1 when the ratio is not usable.
pub(crate) fn fitted_theta(ym: f64, y: f64, yp: f64, a: f64) -> f64 {
    let hm = y - ym;
    let hp = yp - y;
    let p = |t: f64| t.powf(a);
    let std = 2.0 * ((p(ym) / hm + p(yp) / hp) / (hm + hp) - p(y) / (hm * hp));
    let t = a * (a - 1.0) * y.powf(a - 2.0) / std;
    if t.is_finite() && t > 0.0 {
        t
    } else {
        1.0
    }
}

/// Unknown columns: all but the duplicate for periodic sides, interior
/// columns for Dirichlet sides.
pub(crate) fn unknown_columns(nx: usize, periodic: bool) -> std::ops::Range<usize> {
    if periodic {
        0..nx - 1
    } else {
        1..nx - 1
    }
}

/// Horizontal neighbours of column `i`.
#[inline]
pub(crate) fn neighbours(nx: usize, periodic: bool, i: usize) -> (usize, usize) {
    if periodic && i == 0 {
        (nx - 2, 1)
    } else {
        (i - 1, i + 1)
    }
}

/// `−Δ_h u` at interior node `(i, j)` with row factor `theta`.
///
/// Evaluated from neighbour differences, which keeps the rounding error
/// proportional to the local slope rather than to `u` times the stencil
/// weight.
pub(crate) fn neg_laplacian(field: &Field, i: usize, j: usize, theta: f64) -> f64 {
    let mesh = field.mesh();
    let (l, r) = neighbours(field.nx(), field.is_periodic(), i);
    let u = field.at(i, j);
    let hm = mesh.y[j] - mesh.y[j - 1];
    let hp = mesh.y[j + 1] - mesh.y[j];
    let hx = mesh.hx();
    let dyy = 2.0 * ((field.at(i, j - 1) - u) / hm + (field.at(i, j + 1) - u) / hp) / (hm + hp);
    let dxx = ((field.at(l, j) - u) + (field.at(r, j) - u)) / (hx * hx);
    -(theta * dyy + dxx)
}

/// Residual on the full node layout; boundary nodes carry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrid {
    pub values: Vec<f64>,
    pub sup: f64,
}

/// `R = −Δ_h u − f(u)` at every unknown node.
///
/// The standard vertical second difference is
/// `2[(u₋/h₋ + u₊/h₊)/(h₋+h₊) − u/(h₋h₊)]`; periodic sides wrap around.
pub fn assemble_residual(
    field: &Field,
    spec: &NonlinearitySpec,
    stencil: VerticalStencil,
) -> Result<ResidualGrid> {
    let theta = vertical_weights(field.mesh(), spec, stencil);
    residual_with_weights(field, spec, &theta)
}

pub(crate) fn residual_with_weights(
    field: &Field,
    spec: &NonlinearitySpec,
    theta: &[f64],
) -> Result<ResidualGrid> {
    let nx = field.nx();
    let ny = field.ny();
    let mut values = vec![0.0; field.values().len()];
    let mut sup: f64 = 0.0;
    for j in 1..ny {
        for i in unknown_columns(nx, field.is_periodic()) {
            let u = field.at(i, j);
            if !(u > 0.0) {
                return Err(Error::Positivity { i, j, value: u });
            }
            let r = neg_laplacian(field, i, j, theta[j]) - spec.value(u);
            values[j * nx + i] = r;
            sup = sup.max(r.abs());
        }
    }
    Ok(ResidualGrid { values, sup })
}
