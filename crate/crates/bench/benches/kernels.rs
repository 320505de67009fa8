use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nenmf_core::nenmf::factorize_vanilla;
use nenmf_core::{
    gaussian_matrix, gaussian_sketch_pair, generate_problem, init_factors, orthonormal_basis,
    power_iteration_pair, solve_nnls, spectral_norm_sq, subspace_iteration_pair, InnerSolverConfig,
    OuterConfig, RngSeed,
};
use std::hint::black_box;

fn products(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [500, 2000] {
        let x = gaussian_matrix(n, n, RngSeed(1)).unwrap();
        let g = gaussian_matrix(n, 15, RngSeed(2)).unwrap();
        group.bench_with_input(BenchmarkId::new("gt_x", n), &n, |b, _| {
            b.iter(|| black_box(g.t_matmul(&x).unwrap()))
        });
        let f = gaussian_matrix(15, n, RngSeed(3)).unwrap();
        group.bench_with_input(BenchmarkId::new("f_ft", n), &n, |b, _| {
            b.iter(|| black_box(f.matmul_t(&f).unwrap()))
        });
    }
    group.finish();
}

fn factorizations(c: &mut Criterion) {
    let tall = gaussian_matrix(500, 25, RngSeed(4)).unwrap();
    c.bench_function("orthonormal_basis 500x25", |b| {
        b.iter(|| black_box(orthonormal_basis(&tall).unwrap()))
    });
    let g = gaussian_matrix(500, 15, RngSeed(5)).unwrap();
    c.bench_function("spectral_norm_sq 500x15", |b| {
        b.iter(|| black_box(spectral_norm_sq(&g, 1e-9, 100).unwrap()))
    });
}

fn inner_solver(c: &mut Criterion) {
    let inst = generate_problem(500, 500, 15, 30.0, RngSeed(6)).unwrap();
    let init = init_factors(500, 500, 15, RngSeed(7)).unwrap();
    let mut group = c.benchmark_group("solve_nnls");
    for max_iter in [20, 500] {
        let cfg = InnerSolverConfig {
            max_iter,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(max_iter), &cfg, |b, cfg| {
            b.iter(|| black_box(solve_nnls(&inst.g_true, &inst.x, &init.f, cfg).unwrap()))
        });
    }
    group.finish();
}

fn sketches(c: &mut Criterion) {
    let x = generate_problem(500, 500, 15, 30.0, RngSeed(8)).unwrap().x;
    let mut group = c.benchmark_group("sketch 500x500 nu=25");
    group.sample_size(20);
    group.bench_function("gaussian", |b| {
        b.iter(|| black_box(gaussian_sketch_pair(500, 500, 25, RngSeed(9)).unwrap()))
    });
    for q in [1, 4] {
        group.bench_with_input(BenchmarkId::new("subspace", q), &q, |b, &q| {
            b.iter(|| black_box(subspace_iteration_pair(&x, 25, q, RngSeed(9)).unwrap()))
        });
    }
    let full_rank = gaussian_matrix(500, 500, RngSeed(10)).unwrap();
    group.bench_function("power q=4", |b| {
        b.iter(|| black_box(power_iteration_pair(&full_rank, 25, 4, RngSeed(9)).unwrap()))
    });
    group.finish();
}

fn outer_iterations(c: &mut Criterion) {
    let inst = generate_problem(500, 500, 15, 30.0, RngSeed(11)).unwrap();
    let init = init_factors(500, 500, 15, RngSeed(12)).unwrap();
    let cfg = OuterConfig {
        time_budget_seconds: 0.0,
        max_outer_iterations: 5,
        ..Default::default()
    };
    let mut group = c.benchmark_group("vanilla");
    group.sample_size(10);
    group.bench_function("5 outer iterations 500x500", |b| {
        b.iter(|| {
            let mut ignore = |_: &nenmf_core::OuterStep<'_>| {};
            black_box(factorize_vanilla(&inst.x, init.clone(), &cfg, &mut ignore).unwrap())
        })
    });
    group.finish();
}

criterion_group!(
    kernels,
    products,
    factorizations,
    inner_solver,
    sketches,
    outer_iterations
);
criterion_main!(kernels);
