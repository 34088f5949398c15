//! Parallel (rayon, default feature) versus sequential chunked reductions on
//! the reduction kernels and a sparse operator apply at realistic sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;

use dirnorm::fields::Grid;
use dirnorm::geometry::ConvexDomain;
use dirnorm::operators::{self, GeneratorScheme, SparseOperator};
use dirnorm::par;

fn bench_reductions(c: &mut Criterion) {
    let mut group = c.benchmark_group("sum_c64");
    for &len in &[1 << 14, 1 << 18, 1 << 21] {
        let values: Vec<Complex64> = (0..len)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64).cos()))
            .collect();
        group.bench_with_input(BenchmarkId::new("parallel", len), &values, |b, v| {
            b.iter(|| black_box(par::sum_c64(v.len(), |i| v[i] * v[i])))
        });
        group.bench_with_input(BenchmarkId::new("sequential", len), &values, |b, v| {
            b.iter(|| black_box(par::seq::sum_c64(v.len(), |i| v[i] * v[i])))
        });
    }
    group.finish();
}

fn bench_map_collect(c: &mut Criterion) {
    let mut group = c.benchmark_group("map_collect");
    let len = 1 << 16;
    let work = |i: usize| {
        let x = i as f64 * 1e-4;
        (0..32).fold(x, |acc, k| (acc + k as f64).sin())
    };
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map_collect(len, work)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::seq::map_collect(len, work)))
    });
    group.finish();
}

fn sequential_apply(op: &SparseOperator, x: &[Complex64]) -> Vec<Complex64> {
    par::seq::map_collect(op.dim(), |i| {
        op.rows()[i]
            .iter()
            .map(|&(j, v)| v * x[j])
            .sum::<Complex64>()
    })
}

fn bench_operator_apply(c: &mut Criterion) {
    let sq = ConvexDomain::unit_square();
    let grid = Grid::new(&sq, 1.0 / 128.0).unwrap();
    let gen = operators::generator_matrix(&grid, &[1.0, 0.0], GeneratorScheme::Centered).unwrap();
    let x: Vec<Complex64> = (0..gen.dim())
        .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.5).cos()))
        .collect();
    let mut group = c.benchmark_group("generator_apply_127x127");
    group.bench_function("parallel", |b| b.iter(|| black_box(gen.apply(&x).unwrap())));
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(sequential_apply(&gen, &x)))
    });
    group.finish();
}

criterion_group!(benches, bench_reductions, bench_map_collect, bench_operator_apply);
criterion_main!(benches);
