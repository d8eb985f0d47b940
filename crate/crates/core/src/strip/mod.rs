//! Positive solutions of `−Δu = f(u)` on truncated strips `(0,L)×(0,λ)`
//! with `u = 0` on the bottom edge.
//!
//! Vertical nodes are graded as `λ(j/ny)^q` to resolve the boundary layer.
//! The bottom value is regularized to `δ > 0` and driven to its target along
//! a continuation schedule.

mod banded;
mod convergence;
mod newton;
mod residual;

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::profile::{ProfileParams, ProfileTable};

pub use banded::{Banded, BandedLu};
pub use convergence::{convergence_study, sup_error, ConvergenceStudy};
pub use newton::{newton_solve, newton_solve_from, Solution, TraceRecord};
pub use residual::{assemble_residual, vertical_weights, ResidualGrid};
pub(crate) use residual::{fitted_exponent, fitted_theta};

/// Truncated strip geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripDomain {
    #[serde(rename = "L")]
    pub width: f64,
    #[serde(rename = "lambda")]
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub q: f64,
}

impl StripDomain {
    pub fn new(width: f64, height: f64, nx: usize, ny: usize, q: f64) -> Result<Self> {
        let d = Self { width, height, nx, ny, q };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidInput(format!("strip width must be positive, got {}", self.width)));
        }
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::InvalidInput(format!("strip height must be positive, got {}", self.height)));
        }
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::InvalidInput(format!(
                "need nx, ny >= 4, got nx = {}, ny = {}",
                self.nx, self.ny
            )));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(Error::InvalidInput(format!("grading exponent must be >= 1, got {}", self.q)));
        }
        Ok(())
    }

    /// The same strip with `nx` and `ny` doubled.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx, ny: 2 * self.ny, ..*self }
    }
}

/// Node coordinates: `x` uniform on `[0, L]`, `y` graded on `[0, λ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Mesh {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len() - 1
    }

    pub fn hx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn height(&self) -> f64 {
        *self.y.last().unwrap()
    }

    pub fn width(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

/// Vertical nodes `height·(j/n)^q`, `j = 0..=n`, with the top pinned exactly.
pub fn graded_nodes(height: f64, n: usize, q: f64) -> Vec<f64> {
    (0..=n)
        .map(|j| if j == n { height } else { height * (j as f64 / n as f64).powf(q) })
        .collect()
}

pub fn build_mesh(domain: &StripDomain) -> Result<Mesh> {
    domain.validate()?;
    let nx = domain.nx;
    let x = (0..nx)
        .map(|i| if i == nx - 1 { domain.width } else { domain.width * i as f64 / (nx - 1) as f64 })
        .collect();
    let y = graded_nodes(domain.height, domain.ny, domain.q);
    Ok(Mesh { x, y })
}

pub type EdgeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SideFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Lateral boundary treatment.
#[derive(Clone)]
pub enum Sides {
    /// Column `nx−1` duplicates column 0.
    Periodic,
    /// `u(0, y) = u(L, y) = v(y)`.
    DirichletProfile(ProfileTable),
    /// `u = g(x₁, x_N)` on both sides.
    DirichletCustom(SideFn),
}

impl fmt::Debug for Sides {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sides::Periodic => write!(f, "Periodic"),
            Sides::DirichletProfile(t) => write!(f, "DirichletProfile(M = {})", t.params().m),
            Sides::DirichletCustom(_) => write!(f, "DirichletCustom(..)"),
        }
    }
}

/// Boundary data for a strip solve.
#[derive(Clone)]
pub struct BoundaryData {
    /// Bottom value `δ` used when a field is assembled directly.
    pub bottom: f64,
    pub top: EdgeFn,
    pub sides: Sides,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("bottom", &self.bottom)
            .field("sides", &self.sides)
            .finish_non_exhaustive()
    }
}

impl BoundaryData {
    /// Sides and top taken from the profile `v_M`, tabulated at the mesh
    /// heights so that side values are exact profile values.
    pub fn from_profile(params: &ProfileParams, mesh: &Mesh) -> Result<Self> {
        let table = params.tabulate(&mesh.y)?;
        let top_value = *table.v().last().unwrap();
        Ok(Self {
            bottom: 0.0,
            top: Arc::new(move |_| top_value),
            sides: Sides::DirichletProfile(table),
        })
    }

    pub fn periodic(top: EdgeFn) -> Self {
        Self { bottom: 0.0, top, sides: Sides::Periodic }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.sides, Sides::Periodic)
    }

    /// Returns the data with `c` added to the top and Dirichlet sides.
    pub fn shifted(&self, c: f64) -> Self {
        let top = self.top.clone();
        let sides = match &self.sides {
            Sides::Periodic => Sides::Periodic,
            Sides::DirichletProfile(t) => {
                let t = t.clone();
                Sides::DirichletCustom(Arc::new(move |_, y| t.interpolate(y) + c))
            }
            Sides::DirichletCustom(g) => {
                let g = g.clone();
                Sides::DirichletCustom(Arc::new(move |x, y| g(x, y) + c))
            }
        };
        Self { bottom: self.bottom + c, top: Arc::new(move |x| top(x) + c), sides }
    }

    fn side_value(&self, x: f64, y: f64) -> Option<f64> {
        match &self.sides {
            Sides::Periodic => None,
            Sides::DirichletProfile(t) => Some(t.interpolate(y)),
            Sides::DirichletCustom(g) => Some(g(x, y)),
        }
    }
}

/// Grid function on the mesh, row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh: Mesh,
    values: Vec<f64>,
    periodic: bool,
}

impl Field {
    pub fn from_fn<F: Fn(f64, f64) -> f64>(mesh: &Mesh, periodic: bool, f: F) -> Self {
        let mut values = Vec::with_capacity(mesh.x.len() * mesh.y.len());
        for &y in &mesh.y {
            for &x in &mesh.x {
                values.push(f(x, y));
            }
        }
        Self { mesh: mesh.clone(), values, periodic }
    }

    pub fn from_values(mesh: &Mesh, periodic: bool, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.x.len() * mesh.y.len() {
            return Err(Error::InvalidInput("field size does not match mesh".into()));
        }
        Ok(Self { mesh: mesh.clone(), values, periodic })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn nx(&self) -> usize {
        self.mesh.nx()
    }

    pub fn ny(&self) -> usize {
        self.mesh.ny()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.mesh.x.len() + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let nx = self.mesh.x.len();
        self.values[j * nx + i] = v;
    }

    /// Column `i` bottom to top.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..=self.ny()).map(|j| self.at(i, j)).collect()
    }

    /// Columns that are distinct unknowns-or-boundaries (drops the periodic
    /// duplicate).
    pub fn distinct_columns(&self) -> std::ops::Range<usize> {
        if self.periodic {
            0..self.nx() - 1
        } else {
            0..self.nx()
        }
    }

    /// The bottom value (mean of row 0).
    pub fn bottom(&self) -> f64 {
        let nx = self.nx();
        self.values[..nx].iter().sum::<f64>() / nx as f64
    }

    /// Horizontal average at each height.
    pub fn row_means(&self) -> Vec<f64> {
        let cols = self.distinct_columns();
        let n = cols.len() as f64;
        (0..=self.ny())
            .map(|j| cols.clone().map(|i| self.at(i, j)).sum::<f64>() / n)
            .collect()
    }

    /// Writes boundary nodes from `bc` with bottom value `delta`.
    pub fn apply_boundary(&mut self, bc: &BoundaryData, delta: f64) {
        let nx = self.nx();
        let ny = self.ny();
        for i in 0..nx {
            self.set(i, 0, delta);
            let x = self.mesh.x[i];
            self.set(i, ny, (bc.top)(x));
        }
        for j in 1..ny {
            let y = self.mesh.y[j];
            if let Some(v0) = bc.side_value(self.mesh.x[0], y) {
                self.set(0, j, v0);
                let xl = self.mesh.x[nx - 1];
                self.set(nx - 1, j, bc.side_value(xl, y).unwrap());
            }
        }
        self.sync_periodic();
    }

    /// Copies column 0 onto the duplicate column.
    pub(crate) fn sync_periodic(&mut self) {
        if self.periodic {
            let nx = self.nx();
            for j in 0..=self.ny() {
                let v = self.at(0, j);
                self.set(nx - 1, j, v);
            }
        }
    }

    /// CSV with header `x1,xN,u`, one line per node, rows bottom to top.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x1,xN,u")?;
        for (j, &y) in self.mesh.y.iter().enumerate() {
            for (i, &x) in self.mesh.x.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(self.at(i, j)))?;
            }
        }
        Ok(())
    }
}

/// Vertical second-difference operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalStencil {
    /// The nonuniform three-point formula, exact for quadratics.
    Standard,
    /// The three-point formula rescaled per row so that it is exact on
    /// `x_N^(2/(γ+1))`; still exact for constants and linear functions.
    #[default]
    PowerFitted,
}

/// Newton and continuation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Target sup-norm of the discrete residual.
    pub newton_tol: f64,
    /// Newton iterations allowed per continuation level.
    pub max_iters: usize,
    /// Backtracking factor of the line search.
    pub damping: f64,
    /// Iterates must stay above this fraction of the positivity floor.
    pub floor_fraction: f64,
    /// Decreasing bottom values; the last one is the target.
    pub delta_schedule: Vec<f64>,
    pub stencil: VerticalStencil,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-8,
            max_iters: 50,
            damping: 0.5,
            floor_fraction: 0.1,
            delta_schedule: (1..=8).map(|k| 10f64.powi(-k)).collect(),
            stencil: VerticalStencil::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidInput("newton_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidInput("damping must lie in (0, 1)".into()));
        }
        if !(self.floor_fraction > 0.0 && self.floor_fraction < 1.0) {
            return Err(Error::InvalidInput("floor_fraction must lie in (0, 1)".into()));
        }
        let s = &self.delta_schedule;
        if s.is_empty() || s.iter().any(|d| !(*d > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("delta_schedule must be positive and decreasing".into()));
        }
        Ok(())
    }

    /// Target bottom value.
    pub fn final_delta(&self) -> f64 {
        *self.delta_schedule.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(l: f64, ny: usize, q: f64) -> Mesh {
        build_mesh(&StripDomain::new(1.0, l, 4, ny, q).unwrap()).unwrap()
    }

    #[test]
    fn mesh_examples() {
        assert_eq!(mesh(1.0, 4, 1.0).y, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(mesh(1.0, 4, 2.0).y, vec![0.0, 0.0625, 0.25, 0.5625, 1.0]);
        let m = build_mesh(&StripDomain { width: 1.0, height: 2.0, nx: 4, ny: 2, q: 2.0 });
        assert!(m.is_err(), "ny = 2 is below the minimum");
        let d = StripDomain { width: 1.0, height: 2.0, nx: 4, ny: 4, q: 2.0 };
        assert_eq!(build_mesh(&d).unwrap().y, vec![0.0, 0.125, 0.5, 1.125, 2.0]);
    }

    #[test]
    fn graded_nodes_follow_power_law() {
        assert_eq!(graded_nodes(2.0, 2, 2.0), vec![0.0, 0.5, 2.0]);
        let m = mesh(2.0, 4, 2.0);
        for (j, y) in m.y.iter().enumerate() {
            assert_eq!(*y, 2.0 * (j as f64 / 4.0).powi(2));
        }
        assert!(m.y.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn domain_validation() {
        assert!(StripDomain::new(1.0, 1.0, 3, 8, 1.0).is_err());
        assert!(StripDomain::new(1.0, 1.0, 8, 8, 0.5).is_err());
        assert!(StripDomain::new(0.0, 1.0, 8, 8, 1.0).is_err());
        assert!(StripDomain::new(1.0, 1.0, 8, 8, 1.0).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { delta_schedule: vec![1e-2, 1e-1], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { floor_fraction: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn periodic_boundary_duplicates_first_column() {
        let m = mesh(1.0, 4, 1.0);
        let mut f = Field::from_fn(&m, true, |x, y| 1.0 + x + y);
        let bc = BoundaryData::periodic(Arc::new(|x| 2.0 + x));
        f.apply_boundary(&bc, 1e-3);
        for j in 0..=4 {
            assert_eq!(f.at(0, j), f.at(3, j));
        }
        assert_eq!(f.at(1, 0), 1e-3);
    }

    #[test]
    fn field_csv_layout() {
        let m = mesh(1.0, 4, 1.0);
        let f = Field::from_fn(&m, false, |_, y| y);
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().count(), 1 + 4 * 5);
        assert_eq!(s.lines().next().unwrap(), "x1,xN,u");
    }
}
