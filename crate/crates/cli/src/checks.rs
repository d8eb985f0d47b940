//! Executes configured checks against a profile table or a field.

use halfspace_core::compare::{discrete_comparison_test, upper_barrier_residual};
use halfspace_core::nonlinearity::geometric_grid;
use halfspace_core::profile::ode_residual;
use halfspace_core::verifier::{
    check_lower_bounds, check_monotone_xn, estimate_m, fit_boundary_exponent, fit_gradient_exponent,
    moving_plane_check, rescale_check, rigidity_deviation,
};
use halfspace_core::{
    build_mesh, newton_solve, CheckReport, ComparisonOptions, DirectionVector, Field, ProfileTable,
    RigidityOptions, Samples,
};

use crate::error::{CliError, Result};
use crate::scenario::{CheckEntry, CheckSpec, Expect, Scenario, Target};

/// Inputs available to the checks of one scenario.
pub struct Artifacts<'a> {
    pub scenario: &'a Scenario,
    pub profile: Option<&'a ProfileTable>,
    pub field: Option<&'a Field>,
}

/// Runs one check. Numerical errors inside a check become a failing report;
/// only a failed auxiliary solve aborts.
pub fn run_check(entry: &CheckEntry, art: &Artifacts) -> Result<CheckReport> {
    let spec = &entry.spec;
    let target = spec.target(art.field.is_some());
    let raw = match evaluate(spec, target, art) {
        Ok(r) => r,
        Err(Failure::Abort(e)) => return Err(e),
        Err(Failure::Check(e)) => CheckReport::new(spec.name()).note(format!("error: {e}")),
    };
    let mut report = CheckReport { check_name: display_name(spec, target, art), ..raw };
    if entry.expect == Expect::Fail {
        report.passed = !report.passed;
        report.notes.push("negative control: expected to fail".into());
    }
    Ok(report)
}

/// Config name, suffixed with `[profile]` when a check that can read either
/// artifact reads the profile of a scenario that also has a field.
fn display_name(spec: &CheckSpec, target: Target, art: &Artifacts) -> String {
    let dual = !matches!(
        spec,
        CheckSpec::OdeResidual { .. } | CheckSpec::FirstIntegralDrift { .. } | CheckSpec::AsymptoticSlope { .. }
    );
    if dual && target == Target::Profile && art.field.is_some() {
        format!("{}[profile]", spec.name())
    } else {
        spec.name().to_string()
    }
}

enum Failure {
    Check(halfspace_core::Error),
    Abort(CliError),
}

impl From<halfspace_core::Error> for Failure {
    fn from(e: halfspace_core::Error) -> Self {
        Failure::Check(e)
    }
}

fn evaluate(spec: &CheckSpec, target: Target, art: &Artifacts) -> std::result::Result<CheckReport, Failure> {
    let sc = art.scenario;
    let f = &sc.nonlinearity;
    let gamma = f.gamma();
    let missing = |what: &str| Failure::Abort(CliError::config(format!("check {} needs the {what}", spec.name())));
    let table = || art.profile.ok_or_else(|| missing("profile"));
    let field = || art.field.ok_or_else(|| missing("field"));
    let samples = || -> std::result::Result<Samples, Failure> {
        Ok(match target {
            Target::Profile => Samples::from(table()?),
            Target::Field => Samples::from(field()?),
        })
    };
    let reference_m = || sc.profile.map(|p| p.m).ok_or_else(|| missing("profile block"));

    let report = match spec {
        CheckSpec::OdeResidual { t_min, max } => {
            let t = table()?;
            let keep: Vec<usize> = (0..t.len()).filter(|&k| t.t()[k] >= *t_min).collect();
            let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
            let sub = ProfileTable::from_parts(pick(t.t()), pick(t.v()), pick(t.v_prime()), t.params().clone())?;
            let r = ode_residual(&sub)?;
            CheckReport::new("ode_residual").metric("residual", r).metric("t_min", *t_min).metric("max", *max).passed(r <= *max)
        }
        CheckSpec::FirstIntegralDrift { tol } => {
            let d = table()?.first_integral_drift()?;
            CheckReport::new("first_integral_drift").metric("drift", d).metric("tol", *tol).passed(d <= *tol)
        }
        CheckSpec::AsymptoticSlope { tol } => asymptotic_slope(table()?, *tol)?,
        CheckSpec::BoundaryExponent { window, .. } => match target {
            Target::Profile => {
                let (s, w) = exponent_samples(table()?, *window)?;
                fit_boundary_exponent(&s, gamma, Some(w))?
            }
            Target::Field => fit_boundary_exponent(&samples()?, gamma, *window)?,
        },
        CheckSpec::GradientExponent { angle_deg, beta_min, window, .. } => {
            let dir = if *angle_deg == 90.0 {
                DirectionVector::vertical()
            } else {
                DirectionVector::new(angle_deg.to_radians(), *beta_min)?
            };
            let report = match target {
                Target::Profile => {
                    let (s, w) = exponent_samples(table()?, *window)?;
                    fit_gradient_exponent(&s, gamma, dir, Some(w))?
                }
                Target::Field => fit_gradient_exponent(&samples()?, gamma, dir, *window)?,
            };
            report.metric("angle_deg", *angle_deg)
        }
        CheckSpec::MonotoneXn { .. } => check_monotone_xn(&samples()?),
        CheckSpec::MovingPlane { levels, .. } => {
            let s = samples()?;
            let levels = levels.clone().unwrap_or_else(|| (1..=9).map(|k| s.height() * k as f64 / 10.0).collect());
            moving_plane_check(&s, &levels)?
        }
        CheckSpec::LowerBounds { .. } => check_lower_bounds(&samples()?, f),
        CheckSpec::Rigidity { tolerance, row_fraction } => {
            let opts = RigidityOptions { tolerance: *tolerance, row_fraction: *row_fraction };
            rigidity_deviation(&samples()?, f, opts)?
        }
        CheckSpec::ProfileMatch { tol } => {
            let u = field()?;
            let m = reference_m()?;
            let params = sc.profile_params().map_err(Failure::Abort)?;
            let mesh = u.mesh();
            let mut err: f64 = 0.0;
            // The bottom row carries the regularized value δ and is skipped.
            for j in 1..mesh.y.len() {
                let v = params.value(mesh.y[j])?;
                for i in u.distinct_columns() {
                    err = err.max((u.at(i, j) - v).abs());
                }
            }
            CheckReport::new("profile_match").metric("sup_error", err).metric("M", m).metric("tol", *tol).passed(err <= *tol)
        }
        CheckSpec::EstimateM { tol_rel, abs_floor, .. } => {
            let m = reference_m()?;
            let m_hat = estimate_m(&samples()?, f)?;
            let allowance = tol_rel * m.max(*abs_floor);
            let err = (m_hat - m).abs();
            CheckReport::new("estimate_m")
                .metric("m_hat", m_hat)
                .metric("m_expected", m)
                .metric("abs_error", err)
                .metric("allowance", allowance)
                .passed(err <= allowance)
        }
        CheckSpec::Rescale { epsilon } => rescale_check(field()?, *epsilon, f, sc.solver.stencil)?,
        CheckSpec::UpperBarrier { mu, rho } => {
            upper_barrier_residual(*mu, gamma, f, field()?.mesh(), *rho, sc.solver.stencil)?
        }
        CheckSpec::Comparison { top_shift, sign_tol } => {
            let u = field()?;
            let domain = sc.domain.ok_or_else(|| missing("domain"))?;
            let mesh = build_mesh(&domain)?;
            let mut bc = sc.boundary_data(&mesh).map_err(Failure::Abort)?;
            let top = bc.top.clone();
            let shift = *top_shift;
            bc.top = std::sync::Arc::new(move |x| top(x) + shift);
            let v = newton_solve(&domain, f, &bc, &sc.solver).map_err(|e| Failure::Abort(CliError::Solver(e)))?;
            let opts = ComparisonOptions { sign_tol: *sign_tol, stencil: sc.solver.stencil };
            discrete_comparison_test(u, &v.field, f, domain.height, opts)?.metric("top_shift", shift)
        }
    };
    Ok(report)
}

/// Samples of the profile for exponent fits: the profile is evaluated on
/// 32 geometric points spanning `window`, which defaults to
/// `[10⁻⁴ s, 10⁻² s]` with `s = min(t_max, 1/M)`, well inside the
/// near-boundary regime.
fn exponent_samples(table: &ProfileTable, window: Option<(f64, f64)>) -> halfspace_core::Result<(Samples, (f64, f64))> {
    let params = table.params();
    let (a, b) = window.unwrap_or_else(|| {
        let t_max = *table.t().last().unwrap();
        let s = if params.m > 0.0 { t_max.min(1.0 / params.m) } else { t_max };
        (1e-4 * s, 1e-2 * s)
    });
    if !(a > 0.0 && b > a) {
        return Err(halfspace_core::Error::Window(format!("fit window [{a}, {b}] is empty")));
    }
    let grid = geometric_grid(a, b, 32);
    let sub = params.tabulate(&grid)?;
    Ok((Samples::from(&sub), (a, b)))
}

/// The secant slope of the last two samples (from the values alone) must
/// agree with the mean first-integral slope `√(2M + 2F(v))` there, up to
/// `tol` plus twice the trapezoid error `h²/12·|v‴|` with `v‴ = −f′(v)v′`;
/// it must stay above the limit `√(2M)`, and the tabulated slopes must be
/// nonincreasing.
fn asymptotic_slope(t: &ProfileTable, tol: f64) -> halfspace_core::Result<CheckReport> {
    let n = t.len();
    if n < 2 {
        return Err(halfspace_core::Error::InvalidInput("need two profile samples".into()));
    }
    let (ts, v, vp) = (t.t(), t.v(), t.v_prime());
    let limit = (2.0 * t.params().m).sqrt();
    let secant = (v[n - 1] - v[n - 2]) / (ts[n - 1] - ts[n - 2]);
    let predicted = 0.5 * (vp[n - 1] + vp[n - 2]);
    let nonincreasing = vp.windows(2).all(|w| w[1] <= w[0]);
    let h = ts[n - 1] - ts[n - 2];
    let v3 = t.params().spec.derivative(v[n - 2]).abs() * vp[n - 2];
    let allowance = tol + h * h / 6.0 * v3;
    Ok(CheckReport::new("asymptotic_slope")
        .metric("secant_slope", secant)
        .metric("first_integral_slope", predicted)
        .metric("limit", limit)
        .metric("gap", secant - limit)
        .metric("allowance", allowance)
        .passed(nonincreasing && secant >= limit - tol && (secant - predicted).abs() <= allowance))
}
