//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use halfspace_cli::run::produce_field;
use halfspace_cli::Scenario;
use halfspace_core::nonlinearity::geometric_grid;
use halfspace_core::strip::sup_error;
use halfspace_core::verifier::{
    check_monotone_xn, estimate_m, fit_boundary_exponent, fit_gradient_exponent, moving_plane_check,
};
use halfspace_core::{
    build_mesh, lambda_star, newton_solve, poincare_eigenvalue, pure_constant, pure_exact, BoundaryData,
    DirectionVector, Field, NonlinearitySpec, ProfileParams, Samples, SolverConfig, StripDomain,
};

type Outcome = Result<String, String>;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Top-level scenario files, sorted.
fn suite() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(scenario_dir())
        .expect("scenario directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

fn pure3() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(3.0, 1.0).unwrap()
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Solved (or synthetic) field of a suite scenario; artifacts go to a
/// scratch directory.
fn suite_field(path: &Path, scratch: &Path) -> Result<(Scenario, Field), String> {
    let sc = Scenario::load(path).map_err(|e| e.to_string())?;
    let (field, _) = produce_field(&sc, &scratch.join(&sc.name)).map_err(|e| format!("{}: {e}", sc.name))?;
    Ok((sc, field))
}

fn closed_form_profile() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for m in [0.0, 0.5, 2.0] {
        let p = ProfileParams::new(pure3(), m).map_err(|e| e.to_string())?;
        for t in [0.1, 1.0, 10.0] {
            let exact = (2.0 * t * (1.0 + m * t)).sqrt();
            let v = p.value(t).map_err(|e| e.to_string())?;
            worst = worst.max((v - exact).abs() / exact);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-8 && secs < 1.0, format!("max relative error {worst:.2e} (<= 1e-8) in {secs:.3} s (< 1 s)"))
}

fn pure_solution_identity() -> Outcome {
    let k = pure_constant(3.0).map_err(|e| e.to_string())?;
    let k_err = (k - 2f64.sqrt()).abs();
    let residual = |h: f64| {
        let v = |t: f64| pure_exact(3.0, t).unwrap();
        let t = 1.0;
        ((-v(t - h) + 2.0 * v(t) - v(t + h)) / (h * h) - v(t).powi(-3)).abs()
    };
    let hs = [0.1, 0.05, 0.025];
    let orders: Vec<f64> = hs.windows(2).map(|w| (residual(w[0]) / residual(w[1])).log2()).collect();
    let ok = k_err <= 1e-12 && orders.iter().all(|o| (o - 2.0).abs() <= 0.3);
    ensure(ok, format!("|K3 - sqrt 2| = {k_err:.1e} (<= 1e-12); ODE residual orders {orders:.3?} (2.0 +/- 0.3)"))
}

fn first_integral() -> Outcome {
    let grid = geometric_grid(0.01, 100.0, 400);
    let mut worst: f64 = 0.0;
    for m in [0.0, 0.5, 2.0] {
        let p = ProfileParams::new(pure3(), m).map_err(|e| e.to_string())?;
        let table = p.tabulate(&grid).map_err(|e| e.to_string())?;
        worst = worst.max(table.first_integral_drift().map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-6, format!("max drift {worst:.2e} on [0.01, 100] for M in {{0, 0.5, 2}} (<= 1e-6)"))
}

fn rigidity_error(domain: &StripDomain, m: f64) -> Result<f64, String> {
    let p = ProfileParams::new(pure3(), m).map_err(|e| e.to_string())?;
    let mesh = build_mesh(domain).map_err(|e| e.to_string())?;
    let bc = BoundaryData::from_profile(&p, &mesh).map_err(|e| e.to_string())?;
    let sol = newton_solve(domain, &pure3(), &bc, &SolverConfig::default()).map_err(|e| e.to_string())?;
    Ok(sup_error(&sol.field, |_, y| (2.0 * y * (1.0 + m * y)).sqrt(), (0.0, domain.height)))
}

fn rigidity_reproduction() -> Outcome {
    let coarse = StripDomain::new(1.0, 1.0, 64, 128, 2.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let e1 = rigidity_error(&coarse, 0.5)?;
    let secs = start.elapsed().as_secs_f64();
    let e2 = rigidity_error(&coarse.refined(), 0.5)?;
    let ratio = e1 / e2;
    ensure(
        e1 <= 5e-3 && ratio >= 3.0 && secs < 60.0,
        format!("sup error {e1:.2e} at 64x128 (<= 5e-3) in {secs:.1} s (< 60 s); {e2:.2e} at 128x256, ratio {ratio:.2} (>= 3)"),
    )
}

fn monotonicity(fields: &[(Scenario, Field)]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failed = Vec::new();
    for (sc, f) in fields {
        let r = check_monotone_xn(&Samples::from(f));
        worst = worst.min(r.get("min_difference"));
        if !r.passed {
            failed.push(sc.name.clone());
        }
    }
    let names: Vec<&str> = fields.iter().map(|(s, _)| s.name.as_str()).collect();
    ensure(
        failed.is_empty() && names.contains(&"perturbed_top"),
        format!("{} suite fields incl. perturbed_top, min vertical difference {worst:.2e} (> 0); failing: {failed:?}", fields.len()),
    )
}

fn blow_up_exponents(scratch: &Path) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for g in [2, 3, 5] {
        let (sc, f) = suite_field(&scenario_dir().join(format!("pure_gamma{g}.json")), scratch)?;
        let gamma = sc.nonlinearity.gamma();
        let s = Samples::from(&f);
        let b = fit_boundary_exponent(&s, gamma, None).map_err(|e| e.to_string())?;
        let diag = DirectionVector::new(std::f64::consts::FRAC_PI_4, 0.1).map_err(|e| e.to_string())?;
        let v = fit_gradient_exponent(&s, gamma, DirectionVector::vertical(), None).map_err(|e| e.to_string())?;
        let d = fit_gradient_exponent(&s, gamma, diag, None).map_err(|e| e.to_string())?;
        let (a, e) = (2.0 / (gamma + 1.0), (1.0 - gamma) / (gamma + 1.0));
        let within = |x: f64, t: f64| (x - t).abs() <= 0.05;
        ok &= within(b.get("alpha_hat"), a) && within(v.get("slope"), e) && within(d.get("slope"), e);
        lines.push(format!(
            "g={g}: alpha {:.4}/{a:.4}, e_N {:.4}/{e:.4}, 45deg {:.4}/{e:.4}",
            b.get("alpha_hat"),
            v.get("slope"),
            d.get("slope")
        ));
    }
    ensure(ok, format!("{} (+/- 0.05)", lines.join("; ")))
}

fn moving_plane(fields: &[(Scenario, Field)], scratch: &Path) -> Outcome {
    let mut checked = 0;
    let mut failed = Vec::new();
    for (sc, f) in fields {
        let s = Samples::from(f);
        let levels: Vec<f64> = (1..=9).map(|k| s.height() * k as f64 / 10.0).collect();
        let r = moving_plane_check(&s, &levels).map_err(|e| e.to_string())?;
        checked += 1;
        if !r.passed {
            failed.push(sc.name.clone());
        }
    }
    let (_, bump) = suite_field(&scenario_dir().join("bump_control.json"), scratch)?;
    let s = Samples::from(&bump);
    let levels: Vec<f64> = (1..=9).map(|k| s.height() * k as f64 / 10.0).collect();
    let control = moving_plane_check(&s, &levels).map_err(|e| e.to_string())?;
    ensure(
        failed.is_empty() && !control.passed,
        format!(
            "holds at 9 levels on {checked} monotone fields (failing: {failed:?}); bump control fails with violation {:.3}",
            control.get("max_violation")
        ),
    )
}

fn narrow_strip_constant() -> Outcome {
    let l = lambda_star(0.0).map_err(|e| e.to_string())?;
    let l_err = (l - std::f64::consts::FRAC_PI_2).abs();
    let mu = poincare_eigenvalue(1.0, 999).map_err(|e| e.to_string())?;
    let pi2 = std::f64::consts::PI.powi(2);
    let mu_err = (mu - pi2).abs();
    ensure(
        l_err <= 1e-12 && mu_err <= 1e-4,
        format!("|lambda*(0) - pi/2| = {l_err:.1e} (<= 1e-12); |mu_999 - pi^2| = {mu_err:.2e} (<= 1e-4)"),
    )
}

fn first_integral_recovery(scratch: &Path) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for tag in ["m0", "m05", "m2"] {
        let (sc, f) = suite_field(&scenario_dir().join(format!("rigidity_{tag}.json")), scratch)?;
        let m = sc.profile.expect("rigidity scenarios have a profile block").m;
        let m_hat = estimate_m(&Samples::from(&f), &sc.nonlinearity).map_err(|e| e.to_string())?;
        // 1% of M, with M = 0 measured against the M = 0.5 scale.
        ok &= (m_hat - m).abs() <= 0.01 * m.max(0.5);
        lines.push(format!("M={m}: {m_hat:.5}"));
    }
    ensure(ok, format!("{} (within 1%)", lines.join(", ")))
}

fn run_verify_all(out: &Path) -> Result<Vec<i32>, String> {
    suite()
        .iter()
        .map(|p| {
            Command::new(env!("CARGO_BIN_EXE_halfspace"))
                .arg("verify")
                .arg(p)
                .env("HALFSPACE_OUT", out)
                .output()
                .map(|o| o.status.code().unwrap_or(-1))
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn tree(dir: &Path, base: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            tree(&p, base, out);
        } else {
            out.insert(p.strip_prefix(base).unwrap().to_path_buf(), fs::read(&p).unwrap());
        }
    }
}

fn determinism(scratch: &Path) -> Outcome {
    let (a, b) = (scratch.join("run_a"), scratch.join("run_b"));
    let codes_a = run_verify_all(&a)?;
    let codes_b = run_verify_all(&b)?;
    let (mut ta, mut tb) = (BTreeMap::new(), BTreeMap::new());
    tree(&a, &a, &mut ta);
    tree(&b, &b, &mut tb);
    let identical = ta == tb;
    let all_zero = codes_a.iter().chain(&codes_b).all(|&c| c == 0);
    ensure(
        identical && all_zero && !ta.is_empty(),
        format!(
            "{} scenarios, {} artifacts, byte-identical: {identical}, exit codes {codes_a:?}",
            codes_a.len(),
            ta.len()
        ),
    )
}

fn main() -> ExitCode {
    let scratch = std::env::temp_dir().join(format!("halfspace-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&scratch);
    fs::create_dir_all(&scratch).expect("scratch directory");

    let fields: Result<Vec<(Scenario, Field)>, String> = suite()
        .iter()
        .filter_map(|p| {
            let sc = Scenario::load(p).ok()?;
            (sc.has_field() && sc.synthetic.is_none()).then(|| suite_field(p, &scratch.join("suite")))
        })
        .collect();

    let results: Vec<(&str, Outcome)> = vec![
        ("closed-form profile oracle", closed_form_profile()),
        ("pure-solution identity", pure_solution_identity()),
        ("first integral", first_integral()),
        ("rigidity reproduction", rigidity_reproduction()),
        ("monotonicity", fields.as_ref().map_err(Clone::clone).and_then(|f| monotonicity(f))),
        ("blow-up exponents", blow_up_exponents(&scratch.join("exponents"))),
        ("moving-plane inequality", fields.as_ref().map_err(Clone::clone).and_then(|f| moving_plane(f, &scratch.join("control")))),
        ("narrow-strip constant", narrow_strip_constant()),
        ("first-integral recovery", first_integral_recovery(&scratch.join("recovery"))),
        ("determinism", determinism(&scratch)),
    ];

    let mut failures = 0;
    for (k, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(msg) => println!("PASS criterion {}: {name}: {msg}", k + 1),
            Err(msg) => {
                failures += 1;
                println!("FAIL criterion {}: {name}: {msg}", k + 1);
            }
        }
    }
    let _ = fs::remove_dir_all(&scratch);
    println!("acceptance: {} of {} criteria pass", results.len() - failures, results.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
