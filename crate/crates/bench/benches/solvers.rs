use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use halfspace_core::strip::Banded;
use halfspace_core::{
    assemble_residual, build_mesh, newton_solve, BoundaryData, Field, NonlinearitySpec, ProfileParams, SolverConfig,
    StripDomain, VerticalStencil,
};
use std::hint::black_box;

fn pure3() -> NonlinearitySpec {
    NonlinearitySpec::pure_power(3.0, 1.0).unwrap()
}

fn profile_tabulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("profile_tabulate");
    for m in [0.0, 2.0] {
        let params = ProfileParams::new(pure3(), m).unwrap();
        let grid: Vec<f64> = (1..=1000).map(|k| 0.01 * k as f64).collect();
        group.bench_with_input(BenchmarkId::from_parameter(m), &grid, |b, grid| {
            b.iter(|| params.tabulate(black_box(grid)).unwrap())
        });
    }
    group.finish();
}

/// Tridiagonal-plus-wrap band typical of a 64-column strip Jacobian.
fn banded_solve(c: &mut Criterion) {
    let (n, bw) = (64 * 128, 64);
    let mut a = Banded::zeros(n, bw, bw);
    for i in 0..n {
        a.add(i, i, 4.5);
        for off in [1, bw] {
            if i >= off {
                a.add(i, i - off, -1.0);
            }
            if i + off < n {
                a.add(i, i + off, -1.0);
            }
        }
    }
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    c.bench_function("banded_factorize_solve_8192", |b| {
        b.iter(|| a.clone().factorize().unwrap().solve(black_box(&rhs)))
    });
}

fn residual_assembly(c: &mut Criterion) {
    let domain = StripDomain::new(1.0, 1.0, 64, 128, 2.0).unwrap();
    let mesh = build_mesh(&domain).unwrap();
    let field = Field::from_fn(&mesh, false, |_, y| (2.0 * y * (1.0 + 0.5 * y)).sqrt() + 1e-8);
    let spec = pure3();
    c.bench_function("assemble_residual_64x128", |b| {
        b.iter(|| assemble_residual(black_box(&field), &spec, VerticalStencil::PowerFitted).unwrap())
    });
}

fn small_newton_solve(c: &mut Criterion) {
    let domain = StripDomain::new(1.0, 1.0, 16, 32, 2.0).unwrap();
    let mesh = build_mesh(&domain).unwrap();
    let params = ProfileParams::new(pure3(), 0.5).unwrap();
    let bc = BoundaryData::from_profile(&params, &mesh).unwrap();
    let config = SolverConfig::default();
    let mut group = c.benchmark_group("newton");
    group.sample_size(20);
    group.bench_function("solve_16x32", |b| b.iter(|| newton_solve(&domain, &pure3(), &bc, &config).unwrap()));
    group.finish();
}

criterion_group!(benches, profile_tabulation, banded_solve, residual_assembly, small_newton_solve);
criterion_main!(benches);
