use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sketchlab::kernel::{nystrom_trace_error, rbf_kernel, KernelConfig};
use sketchlab::linalg::residual_projection;
use sketchlab::sketch::{draw_sketch, low_rank_error, monte_carlo_errors};
use sketchlab::surrogate::solve_gamma;
use sketchlab::{DiagonalMatrix, SketchSpec};
use sketchlab_bench::{dense_matrix, exponential_spectrum};

fn gamma(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_gamma");
    for n in [500, 10_000, 100_000] {
        let s = exponential_spectrum(0.99, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| solve_gamma(black_box(s), 50).unwrap())
        });
    }
    group.finish();
}

fn sketches(c: &mut Criterion) {
    let mut group = c.benchmark_group("draw_sketch");
    for (name, spec) in [("gaussian", SketchSpec::gaussian(50, 1)), ("rademacher", SketchSpec::rademacher(50, 1))] {
        group.bench_function(name, |b| b.iter(|| draw_sketch(black_box(&spec), 500, 7)));
    }
    group.finish();
}

fn projections(c: &mut Criterion) {
    let a = dense_matrix(0.95, 200, 3);
    let s = draw_sketch(&SketchSpec::gaussian(20, 2), 200, 0);
    let x = &s * &a;
    c.bench_function("residual_projection/20x200", |b| b.iter(|| residual_projection(black_box(&x)).unwrap()));
    c.bench_function("low_rank_error/dense_200", |b| b.iter(|| low_rank_error(black_box(&a), &s).unwrap()));

    let d = DiagonalMatrix::square(exponential_spectrum(0.99, 500).singular_values()).unwrap();
    let spec = SketchSpec::gaussian(50, 4);
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("diagonal_500_k50_10trials", |b| b.iter(|| monte_carlo_errors(&d, &spec, 10).unwrap()));
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let pts = dense_matrix(0.9, 200, 5).columns(0, 5).into_owned();
    let cfg = KernelConfig::new(1.0).unwrap();
    c.bench_function("rbf_kernel/200x5", |b| b.iter(|| rbf_kernel(black_box(&pts), &cfg).unwrap()));
    let k = rbf_kernel(&pts, &cfg).unwrap();
    let s = draw_sketch(&SketchSpec::gaussian(20, 6), 200, 0);
    c.bench_function("nystrom_trace_error/200_k20", |b| b.iter(|| nystrom_trace_error(black_box(&k), &s).unwrap()));
}

criterion_group!(benches, gamma, sketches, projections, kernels);
criterion_main!(benches);
