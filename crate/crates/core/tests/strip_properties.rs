use std::sync::Arc;

use halfspace_core::strip::{convergence_study, sup_error};
use halfspace_core::*;

fn pure3() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(3.0, 1.0).unwrap()
}

fn periodic_top(c: f64) -> BoundaryData {
    BoundaryData::periodic(Arc::new(move |_| c))
}

fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn converged_fields_meet_tolerance_and_stay_positive() {
    let d = StripDomain::new(1.0, 1.0, 9, 32, 2.0).unwrap();
    let config = SolverConfig::default();
    let sol = newton_solve(&d, &pure3(), &periodic_top(1.2), &config).unwrap();
    let r = assemble_residual(&sol.field, &pure3(), config.stencil).unwrap();
    assert!(r.sup <= config.newton_tol);
    assert!(sol.field.values().iter().all(|&u| u > 0.0));
}

#[test]
fn identical_configs_give_bitwise_identical_fields() {
    let d = StripDomain::new(2.0, 1.0, 17, 32, 2.0).unwrap();
    let bc = BoundaryData::periodic(Arc::new(|x: f64| 1.5 + 0.2 * (std::f64::consts::PI * x).sin()));
    let a = newton_solve(&d, &pure3(), &bc, &SolverConfig::default()).unwrap();
    let b = newton_solve(&d, &pure3(), &bc, &SolverConfig::default()).unwrap();
    assert_eq!(a.field.values(), b.field.values());
    assert_eq!(a.trace, b.trace);
}

#[test]
fn ordered_boundary_data_give_ordered_fields() {
    let d = StripDomain::new(1.0, 1.0, 9, 32, 2.0).unwrap();
    let config = SolverConfig::default();
    let low = newton_solve(&d, &pure3(), &periodic_top(1.0), &config).unwrap();
    let high = newton_solve(&d, &pure3(), &periodic_top(1.5), &config).unwrap();
    for (a, b) in low.field.values().iter().zip(high.field.values()) {
        assert!(a <= b, "{a} > {b}");
    }
}

#[test]
fn refining_the_continuation_schedule_barely_moves_the_field() {
    let d = StripDomain::new(1.0, 1.0, 9, 32, 2.0).unwrap();
    let coarse = SolverConfig::default();
    let mut schedule = Vec::new();
    for w in coarse.delta_schedule.windows(2) {
        schedule.push(w[0]);
        schedule.push((w[0] * w[1]).sqrt());
    }
    schedule.push(coarse.final_delta());
    let fine = SolverConfig { delta_schedule: schedule, ..coarse.clone() };
    let a = newton_solve(&d, &pure3(), &periodic_top(1.2), &coarse).unwrap();
    let b = newton_solve(&d, &pure3(), &periodic_top(1.2), &fine).unwrap();
    assert!(max_abs_diff(&a.field, &b.field) <= 10.0 * coarse.newton_tol);
}

#[test]
fn linear_exact_solution_is_reproduced_to_roundoff() {
    let zero = Envelope { coeff: 0.0, exponent: 3.0 };
    let spec = NonlinearitySpec::custom(CustomFn::new(|_| 0.0, zero, zero, 1.0)).unwrap();
    let domains: Vec<_> = [16, 32].iter().map(|&n| StripDomain::new(1.0, 1.0, 5, n, 2.0).unwrap()).collect();
    let config = SolverConfig { delta_schedule: vec![1.0], ..SolverConfig::default() };
    let study = convergence_study(
        &domains,
        &spec,
        |_| Ok(BoundaryData::periodic(Arc::new(|_| 2.0))),
        |_, y| 1.0 + y,
        &config,
        (0.0, 1.0),
    )
    .unwrap();
    assert!(study.errors.iter().all(|&e| e < 1e-12), "{study:?}");
    assert_eq!(study.orders, vec![None]);
}

#[test]
fn grading_reduces_the_near_boundary_error() {
    let params = ProfileParams::new(pure3(), 0.5).unwrap();
    let exact = |_: f64, y: f64| (2.0 * y * (1.0 + 0.5 * y)).sqrt();
    let config = SolverConfig { stencil: VerticalStencil::Standard, ..SolverConfig::default() };
    let error_for = |q: f64| {
        let d = StripDomain::new(1.0, 1.0, 5, 64, q).unwrap();
        let bc = BoundaryData::from_profile(&params, &build_mesh(&d).unwrap()).unwrap();
        let sol = newton_solve(&d, &pure3(), &bc, &config).unwrap();
        sup_error(&sol.field, exact, (0.0, 1.0 / 8.0))
    };
    let (uniform, graded) = (error_for(1.0), error_for(2.0));
    assert!(graded < uniform, "graded {graded:e} vs uniform {uniform:e}");
}
