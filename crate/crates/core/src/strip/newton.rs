//! Damped Newton with continuation in the bottom value `δ`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::banded::Banded;
use super::residual::{neighbours, residual_with_weights, stencil, unknown_columns, vertical_weights};
use super::{build_mesh, BoundaryData, Field, Mesh, SolverConfig, StripDomain};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::profile::pure_exact_scaled;

/// Line-search halvings before a step is declared failed.
const MAX_HALVINGS: usize = 40;
/// Levenberg shifts tried per Newton step when `f′ > 0` somewhere.
const MAX_SHIFTS: usize = 8;

/// One Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub delta: f64,
    pub iteration: usize,
    /// Sup-norm residual before the step.
    pub residual: f64,
    /// Accepted step length; 0 on the converged record.
    pub step: f64,
}

/// Converged field and its iteration history.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub trace: Vec<TraceRecord>,
    /// Final sup-norm residual.
    pub residual: f64,
    /// True when some level stopped at the rounding floor of the residual
    /// rather than at `newton_tol`.
    pub roundoff_limited: bool,
}

impl Solution {
    /// Trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.trace {
            let line = serde_json::to_string(r).map_err(io::Error::other)?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Boundary-layer barrier `c^(1/(γ+1)) K_γ y^(2/(γ+1))`, or 0 if `f` has no
/// singular part.
fn barrier(spec: &NonlinearitySpec, y: f64) -> f64 {
    let (g, c) = (spec.gamma(), spec.c_sing());
    if g > 1.0 && c > 0.0 {
        pure_exact_scaled(g, c, y).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Solves on a fresh mesh from the barrier guess, corrected linearly to
/// meet the top data.
pub fn newton_solve(
    domain: &StripDomain,
    spec: &NonlinearitySpec,
    bc: &BoundaryData,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    let mesh = build_mesh(domain)?;
    let delta0 = config.delta_schedule[0];
    let lam = mesh.height();
    let top_barrier = barrier(spec, lam);
    let guess = Field::from_fn(&mesh, bc.is_periodic(), |x, y| {
        let b = barrier(spec, y) + ((bc.top)(x) - top_barrier) * y / lam;
        b.max(delta0)
    });
    newton_solve_from(guess, spec, bc, config)
}

/// Solves starting from `guess`; its boundary nodes are overwritten.
pub fn newton_solve_from(
    guess: Field,
    spec: &NonlinearitySpec,
    bc: &BoundaryData,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    if guess.is_periodic() != bc.is_periodic() {
        return Err(Error::InvalidInput("guess and boundary data disagree on periodicity".into()));
    }
    let mut solver = Newton::new(guess, spec, config);
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut roundoff_limited = false;
    for &delta in &config.delta_schedule {
        solver.field.apply_boundary(bc, delta);
        // Keep the interior above the new bottom value's floor.
        solver.set_floor(delta);
        solver.lift_to_floor();
        let (r, limited) = solver.solve_level(delta, &mut trace)?;
        residual = r;
        roundoff_limited |= limited;
    }
    Ok(Solution { field: solver.field, trace, residual, roundoff_limited })
}

struct Newton<'a> {
    field: Field,
    spec: &'a NonlinearitySpec,
    config: &'a SolverConfig,
    theta: Vec<f64>,
    floor: Vec<f64>,
    cols: std::ops::Range<usize>,
}

impl<'a> Newton<'a> {
    fn new(field: Field, spec: &'a NonlinearitySpec, config: &'a SolverConfig) -> Self {
        let theta = vertical_weights(field.mesh(), spec, config.stencil);
        let cols = unknown_columns(field.nx(), field.is_periodic());
        let floor = vec![0.0; field.ny() + 1];
        Self { field, spec, config, theta, floor, cols }
    }

    fn mesh(&self) -> &Mesh {
        self.field.mesh()
    }

    /// Per-row floor `ρ·(δ + min(barrier(y), min boundary data))`.
    fn set_floor(&mut self, delta: f64) {
        let (nx, ny) = (self.field.nx(), self.field.ny());
        let mut bmin = (0..nx).map(|i| self.field.at(i, ny)).fold(f64::INFINITY, f64::min);
        if !self.field.is_periodic() {
            for j in 1..ny {
                bmin = bmin.min(self.field.at(0, j)).min(self.field.at(nx - 1, j));
            }
        }
        let bmin = bmin.max(0.0);
        let rho = self.config.floor_fraction;
        self.floor = self.mesh().y.iter().map(|&y| rho * (delta + barrier(self.spec, y).min(bmin))).collect();
    }

    fn lift_to_floor(&mut self) {
        for j in 1..self.field.ny() {
            for i in self.cols.clone() {
                let f = self.floor[j];
                if self.field.at(i, j) < f {
                    self.field.set(i, j, f);
                }
            }
        }
        self.field.sync_periodic();
    }

    fn n_cols(&self) -> usize {
        self.cols.len()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.n_cols() + (i - self.cols.start)
    }

    fn residual(&self, field: &Field) -> Result<(Vec<f64>, f64)> {
        let r = residual_with_weights(field, self.spec, &self.theta)?;
        let nx = field.nx();
        let mut out = Vec::with_capacity(self.n_cols() * (field.ny() - 1));
        for j in 1..field.ny() {
            for i in self.cols.clone() {
                out.push(r.values[j * nx + i]);
            }
        }
        Ok((out, r.sup))
    }

    /// Jacobian `−Δ_h − f′(u) + μ`.
    fn jacobian(&self, mu: f64) -> Banded {
        let (nx, ny) = (self.field.nx(), self.field.ny());
        let periodic = self.field.is_periodic();
        let nc = self.n_cols();
        let n = nc * (ny - 1);
        let mut a = Banded::zeros(n, nc, nc);
        for j in 1..ny {
            let s = stencil(self.mesh(), j, self.theta[j]);
            for i in self.cols.clone() {
                let k = self.index(i, j);
                a.add(k, k, s.diag - self.spec.derivative(self.field.at(i, j)) + mu);
                if j > 1 {
                    a.add(k, k - nc, -s.below);
                }
                if j + 1 < ny {
                    a.add(k, k + nc, -s.above);
                }
                let (l, r) = neighbours(nx, periodic, i);
                // Wrap the periodic duplicate column onto column 0.
                let r = if periodic && r == nx - 1 { 0 } else { r };
                for c in [l, r] {
                    if self.cols.contains(&c) {
                        a.add(k, self.index(c, j), -s.side);
                    }
                }
            }
        }
        a
    }

    /// Largest positive `f′(u)` over the unknowns.
    fn max_positive_slope(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 1..self.field.ny() {
            for i in self.cols.clone() {
                m = m.max(self.spec.derivative(self.field.at(i, j)));
            }
        }
        m
    }

    fn trial(&self, d: &[f64], alpha: f64) -> Field {
        let mut f = self.field.clone();
        for j in 1..f.ny() {
            for i in self.cols.clone() {
                let k = self.index(i, j);
                f.set(i, j, self.field.at(i, j) + alpha * d[k]);
            }
        }
        f.sync_periodic();
        f
    }

    fn above_floor(&self, f: &Field) -> bool {
        (1..f.ny()).all(|j| self.cols.clone().all(|i| f.at(i, j) >= self.floor[j]))
    }

    /// Size of the residual attributable to rounding of the stored values:
    /// `16 ε max(w_j |u| + |f(u)|)` with `w_j` the stencil diagonal.
    fn rounding_floor(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 1..self.field.ny() {
            let w = stencil(self.mesh(), j, self.theta[j]).diag;
            for i in self.cols.clone() {
                let u = self.field.at(i, j);
                m = m.max(w * u.abs() + self.spec.value(u).abs());
            }
        }
        16.0 * f64::EPSILON * m
    }

    /// Runs Newton at one bottom value; the flag reports a stop at the
    /// rounding floor.
    fn solve_level(&mut self, delta: f64, trace: &mut Vec<TraceRecord>) -> Result<(f64, bool)> {
        let (mut r, mut norm) = self.residual(&self.field)?;
        for iteration in 0..self.config.max_iters {
            if norm <= self.config.newton_tol {
                trace.push(TraceRecord { delta, iteration, residual: norm, step: 0.0 });
                return Ok((norm, false));
            }
            let shift_base = self.max_positive_slope();
            let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
            let mut accepted = None;
            let mut floor_blocked = true;
            let shifts = if shift_base > 0.0 { MAX_SHIFTS } else { 1 };
            for s in 0..shifts {
                let mu = if s == 0 { 0.0 } else { shift_base * 10f64.powi(s as i32 - 1) };
                let lu = match self.jacobian(mu).factorize() {
                    Ok(lu) => lu,
                    Err(e) if s + 1 < shifts => {
                        let _ = e;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let d = lu.solve(&rhs);
                if d.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let mut alpha = 1.0;
                for _ in 0..MAX_HALVINGS {
                    let f = self.trial(&d, alpha);
                    if self.above_floor(&f) {
                        floor_blocked = false;
                        let (rt, nt) = self.residual(&f)?;
                        if nt < norm {
                            accepted = Some((f, rt, nt, alpha));
                            break;
                        }
                    }
                    alpha *= self.config.damping;
                }
                if accepted.is_some() {
                    break;
                }
            }
            match accepted {
                Some((f, rt, nt, alpha)) => {
                    trace.push(TraceRecord { delta, iteration, residual: norm, step: alpha });
                    self.field = f;
                    r = rt;
                    norm = nt;
                }
                // No descent is possible once the residual is rounding noise.
                None if norm <= self.rounding_floor() => {
                    trace.push(TraceRecord { delta, iteration, residual: norm, step: 0.0 });
                    return Ok((norm, true));
                }
                None if floor_blocked => return Err(Error::PositivityLoss { delta, iteration }),
                None => {
                    return Err(Error::NonConvergence { iterations: iteration, residual: norm, delta })
                }
            }
        }
        if norm <= self.config.newton_tol {
            trace.push(TraceRecord { delta, iteration: self.config.max_iters, residual: norm, step: 0.0 });
            return Ok((norm, false));
        }
        Err(Error::NonConvergence { iterations: self.config.max_iters, residual: norm, delta })
    }
}
