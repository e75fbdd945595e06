use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use degenpde::operators::{apply_a, CoefficientSet};
use degenpde::solver::{solve_ibvp, Mode};
use degenpde::tensor_chart::{covariant_derivative, divergence, TensorField};
use degenpde::weighted::{weighted_sobolev_norm, NormSpec};
use degenpde_bench::{cusp_2d, cusp_problem, polar, smooth_vector};

fn tensor_calculus(c: &mut Criterion) {
    let mut group = c.benchmark_group("tensor_calculus");
    for n in [33, 65, 129] {
        let g = polar(n);
        let x = smooth_vector(&g);
        group.bench_with_input(BenchmarkId::new("covariant_derivative", n), &n, |b, _| {
            b.iter(|| covariant_derivative(&x, &g).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("divergence", n), &n, |b, _| {
            b.iter(|| divergence(&x, &g).unwrap())
        });
    }
    group.finish();
}

fn operator_and_norms(c: &mut Criterion) {
    let geo = cusp_2d();
    let grid = geo.grid(&[65, 65]).unwrap();
    let g = geo.metric_field(grid.clone()).unwrap();
    let (rho, _) = geo.datum.samples(&grid).unwrap();
    let rho2 = geo.datum.rho.expr().clone() * geo.datum.rho.expr().clone();
    let coeffs = CoefficientSet::isotropic(2, rho2).unwrap().sample(&grid, 0.0).unwrap();
    let u = TensorField::scalar_from_fn(&grid, |x| (3.0 * x[0]).sin() * x[1].cos());

    c.bench_function("apply_a/cusp_65x65", |b| b.iter(|| apply_a(&u, &coeffs, &g).unwrap()));
    let spec = NormSpec::new(2.0, 2, 0.5);
    c.bench_function("weighted_sobolev_k2/cusp_65x65", |b| {
        b.iter(|| weighted_sobolev_norm(&u, &spec, &rho, &g).unwrap())
    });
}

fn solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_ibvp");
    group.sample_size(10);
    for n in [65, 129, 257] {
        let p = cusp_problem(n, 100, Mode::Direct);
        group.bench_with_input(BenchmarkId::new("cusp_direct", n), &n, |b, _| b.iter(|| solve_ibvp(&p).unwrap()));
    }
    let p = cusp_problem(129, 100, Mode::Both);
    group.bench_function("cusp_both/129", |b| b.iter(|| solve_ibvp(&p).unwrap()));
    group.finish();
}

criterion_group!(benches, tensor_calculus, operator_and_norms, solves);
criterion_main!(benches);
