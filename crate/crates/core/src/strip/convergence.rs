//! Mesh-refinement studies against a known solution.

use serde::{Deserialize, Serialize};

use super::{build_mesh, newton_solve, BoundaryData, Field, Mesh, SolverConfig, StripDomain};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

/// Errors below this are treated as roundoff and yield no order.
const ROUNDOFF: f64 = 1e-11;

/// Sup errors per mesh and observed orders between consecutive meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub ny: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log₂(e_k / e_{k+1})`, `None` when either error is at roundoff level.
    pub orders: Vec<Option<f64>>,
}

impl ConvergenceStudy {
    pub fn from_errors(ny: Vec<usize>, errors: Vec<f64>) -> Self {
        let orders = errors
            .windows(2)
            .map(|w| (w[0] > ROUNDOFF && w[1] > ROUNDOFF).then(|| (w[0] / w[1]).log2()))
            .collect();
        Self { ny, errors, orders }
    }
}

/// Max `|u − exact|` over distinct columns and rows with `y` in `y_range`.
pub fn sup_error<E: Fn(f64, f64) -> f64>(field: &Field, exact: E, y_range: (f64, f64)) -> f64 {
    let mesh = field.mesh();
    let mut e: f64 = 0.0;
    for (j, &y) in mesh.y.iter().enumerate() {
        if y < y_range.0 || y > y_range.1 {
            continue;
        }
        for i in field.distinct_columns() {
            e = e.max((field.at(i, j) - exact(mesh.x[i], y)).abs());
        }
    }
    e
}

/// Solves on each domain and measures the sup error in the height window.
pub fn convergence_study<B, E>(
    domains: &[StripDomain],
    spec: &NonlinearitySpec,
    bc_for: B,
    exact: E,
    config: &SolverConfig,
    window: (f64, f64),
) -> Result<ConvergenceStudy>
where
    B: Fn(&Mesh) -> Result<BoundaryData>,
    E: Fn(f64, f64) -> f64,
{
    if domains.len() < 2 {
        return Err(Error::InvalidInput("a convergence study needs at least two meshes".into()));
    }
    let mut errors = Vec::with_capacity(domains.len());
    for d in domains {
        let mesh = build_mesh(d)?;
        let bc = bc_for(&mesh)?;
        let sol = newton_solve(d, spec, &bc, config)?;
        errors.push(sup_error(&sol.field, &exact, window));
    }
    Ok(ConvergenceStudy::from_errors(domains.iter().map(|d| d.ny).collect(), errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileParams;
    use crate::strip::VerticalStencil;

    fn profile_study(m: f64, stencil: VerticalStencil) -> ConvergenceStudy {
        let spec = NonlinearitySpec::pure_power(3.0, 1.0).unwrap();
        let params = ProfileParams::new(spec.clone(), m).unwrap();
        let domains: Vec<_> = [32, 64, 128].iter().map(|&n| StripDomain::new(1.0, 1.0, 5, n, 2.0).unwrap()).collect();
        let config = SolverConfig { stencil, ..SolverConfig::default() };
        convergence_study(
            &domains,
            &spec,
            |mesh| BoundaryData::from_profile(&params, mesh),
            |_, y| (2.0 * y * (1.0 + m * y)).sqrt(),
            &config,
            (0.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn fitted_stencil_converges_at_second_order() {
        let s = profile_study(0.5, VerticalStencil::PowerFitted);
        for o in &s.orders {
            let o = o.unwrap();
            assert!((1.7..=2.3).contains(&o), "{s:?}");
        }
    }

    #[test]
    fn standard_stencil_is_first_order_near_the_boundary() {
        let s = profile_study(0.5, VerticalStencil::Standard);
        let o = s.orders[1].unwrap();
        assert!((0.8..=1.3).contains(&o), "{s:?}");
    }

    #[test]
    fn roundoff_errors_have_no_order() {
        let s = ConvergenceStudy::from_errors(vec![8, 16], vec![1e-13, 1e-14]);
        assert_eq!(s.orders, vec![None]);
        let s = ConvergenceStudy::from_errors(vec![8, 16], vec![4e-4, 1e-4]);
        assert!((s.orders[0].unwrap() - 2.0).abs() < 1e-12);
    }
}
