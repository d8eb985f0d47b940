//! The `profile`, `solve` and `verify` commands.

use std::fs;
use std::path::{Path, PathBuf};

use halfspace_core::io::write_atomic;
use halfspace_core::report::reports_to_json;
use halfspace_core::strip::Solution;
use halfspace_core::{build_mesh, newton_solve, pure_exact, CheckReport, Field, ProfileTable};
use serde::Serialize;

use crate::checks::{run_check, Artifacts};
use crate::error::{CliError, Result};
use crate::scenario::{Scenario, Synthetic, Target};

/// Directory holding the artifacts of `scenario` under `root`.
pub fn scenario_dir(root: &Path, scenario: &Scenario) -> PathBuf {
    root.join(&scenario.name)
}

/// Creates `dir` and atomically writes `name` inside it.
pub fn write_artifact(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    write_atomic(&path, contents).map_err(|e| CliError::io(path, e))
}

/// Tabulates the profile block and writes `profile.csv`.
pub fn tabulate_profile(sc: &Scenario, dir: &Path) -> Result<ProfileTable> {
    let block = sc.profile.ok_or_else(|| CliError::config("scenario has no profile block"))?;
    let table = sc.profile_params()?.tabulate(&block.grid()).map_err(CliError::Solver)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).expect("writing to memory");
    write_artifact(dir, "profile.csv", &csv)?;
    Ok(table)
}

/// Solver summary written next to the field.
#[derive(Debug, Serialize)]
struct SolveSummary {
    name: String,
    nodes: usize,
    residual: f64,
    newton_tol: f64,
    roundoff_limited: bool,
    newton_steps: usize,
    final_delta: f64,
}

/// Produces the scenario field, by solving or from the synthetic block,
/// and writes `field.csv` plus, for solves, `trace.jsonl` and `solve.json`.
pub fn produce_field(sc: &Scenario, dir: &Path) -> Result<(Field, Option<Solution>)> {
    let domain = sc.domain.ok_or_else(|| CliError::config("scenario has no domain block"))?;
    let mesh = build_mesh(&domain)?;
    let (field, solution) = match &sc.synthetic {
        Some(syn) => (synthetic_field(sc, syn, &mesh)?, None),
        None => {
            let bc = sc.boundary_data(&mesh)?;
            let sol = newton_solve(&domain, &sc.nonlinearity, &bc, &sc.solver).map_err(CliError::Solver)?;
            let mut trace = Vec::new();
            sol.write_trace(&mut trace).expect("writing to memory");
            write_artifact(dir, "trace.jsonl", &trace)?;
            let summary = SolveSummary {
                name: sc.name.clone(),
                nodes: sol.field.values().len(),
                residual: sol.residual,
                newton_tol: sc.solver.newton_tol,
                roundoff_limited: sol.roundoff_limited,
                newton_steps: sol.trace.iter().filter(|r| r.step > 0.0).count(),
                final_delta: sc.solver.final_delta(),
            };
            let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            json.push('\n');
            write_artifact(dir, "solve.json", json.as_bytes())?;
            (sol.field.clone(), Some(sol))
        }
    };
    let mut csv = Vec::new();
    field.write_csv(&mut csv).expect("writing to memory");
    write_artifact(dir, "field.csv", &csv)?;
    Ok((field, solution))
}

fn synthetic_field(sc: &Scenario, syn: &Synthetic, mesh: &halfspace_core::Mesh) -> Result<Field> {
    let gamma = sc.nonlinearity.gamma();
    let periodic = sc.boundary.as_ref().is_none_or(|b| b.sides == crate::scenario::SideData::Periodic);
    let lam = mesh.height();
    let base = |y: f64| pure_exact(gamma, y).expect("heights are nonnegative and gamma > 1");
    Ok(match *syn {
        Synthetic::Bump { amplitude, center, width } => Field::from_fn(mesh, periodic, |_, y| {
            let z = (y - center) / width;
            base(y) + amplitude * (-z * z).exp()
        }),
        Synthetic::Constant { value } => Field::from_fn(mesh, periodic, |_, _| value),
        Synthetic::NonMonotone { amplitude } => Field::from_fn(mesh, periodic, |_, y| {
            base(y) + amplitude * (3.0 * std::f64::consts::TAU * y / lam).sin()
        }),
    })
}

/// Default profile-level checks when a scenario lists none.
fn default_profile_checks() -> Vec<crate::scenario::CheckEntry> {
    serde_json::from_str(
        r#"[{"check": "ode_residual"}, {"check": "first_integral_drift"},
            {"check": "asymptotic_slope"}, {"check": "boundary_exponent", "on": "profile"}]"#,
    )
    .expect("default checks parse")
}

/// Tabulates the profile and runs the profile-level checks; writes
/// `profile.csv` and `profile_reports.json`.
pub fn run_profile(sc: &Scenario, dir: &Path) -> Result<Vec<CheckReport>> {
    let table = tabulate_profile(sc, dir)?;
    let has_field = sc.has_field();
    let mut checks: Vec<_> = sc.checks.iter().filter(|c| c.spec.target(has_field) == Target::Profile).cloned().collect();
    if checks.is_empty() {
        checks = default_profile_checks();
    }
    let art = Artifacts { scenario: sc, profile: Some(&table), field: None };
    let reports = checks.iter().map(|c| run_check(c, &art)).collect::<Result<Vec<_>>>()?;
    write_artifact(dir, "profile_reports.json", reports_to_json(&reports).as_bytes())?;
    Ok(reports)
}

/// Solves (or synthesizes) the field and writes its artifacts.
pub fn run_solve(sc: &Scenario, dir: &Path) -> Result<(Field, Option<Solution>)> {
    if !sc.has_field() {
        return Err(CliError::config("solve requires domain and boundary blocks"));
    }
    produce_field(sc, dir)
}

/// Produces whatever artifacts the checks need, runs them in order and
/// writes `reports.json`.
pub fn run_verify(sc: &Scenario, dir: &Path) -> Result<Vec<CheckReport>> {
    let has_field = sc.has_field();
    let needs = |t: Target| sc.checks.iter().any(|c| c.spec.target(has_field) == t);
    let table = if needs(Target::Profile) { Some(tabulate_profile(sc, dir)?) } else { None };
    let field = if needs(Target::Field) { Some(produce_field(sc, dir)?.0) } else { None };
    let art = Artifacts { scenario: sc, profile: table.as_ref(), field: field.as_ref() };
    let reports = sc.checks.iter().map(|c| run_check(c, &art)).collect::<Result<Vec<_>>>()?;
    write_artifact(dir, "reports.json", reports_to_json(&reports).as_bytes())?;
    Ok(reports)
}

/// Exit code for a set of reports: 0 when all pass, 1 otherwise.
pub fn reports_exit_code(reports: &[CheckReport]) -> u8 {
    if reports.iter().all(|r| r.passed) {
        crate::error::EXIT_PASS
    } else {
        crate::error::EXIT_CHECK_FAILED
    }
}
