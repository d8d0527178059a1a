use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use volterra_core::bounds::verify_lemma41_integer;
use volterra_core::dsl::{bind_kernel, parse};
use volterra_core::harness::load_catalog;
use volterra_core::marching::{inner_sum_generic, inner_sum_separable};
use volterra_core::{make_grid, picard_solve, solve, PicardOptions, SolveOptions};

fn inner_sums(c: &mut Criterion) {
    let mut group = c.benchmark_group("inner_sum");
    let grid = make_grid(1.0, 32).unwrap();
    let state: Vec<f64> = (0..32).map(|j| 1.0 + 0.01 * j as f64).collect();
    for (n, src) in [(2, "exp(-t) * x1 * x2"), (3, "exp(-t) * x1 * x2 * x3")] {
        let k = bind_kernel(&parse(src, n).unwrap(), n, None).unwrap();
        group.bench_with_input(BenchmarkId::new("generic", n), &n, |b, _| {
            b.iter(|| inner_sum_generic(&k, &grid, 32, black_box(&state), 4).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("separable", n), &n, |b, _| {
            b.iter(|| inner_sum_separable(&k, &grid, 32, black_box(&state)).unwrap())
        });
    }
    group.finish();
}

fn marching(c: &mut Criterion) {
    let mut group = c.benchmark_group("marching");
    for name in ["exp_growth", "quadratic", "factorial_infinite"] {
        let pf = load_catalog(name).unwrap();
        let p = pf.second_kind().unwrap().clone();
        let opts = SolveOptions {
            truncation: pf.truncation.unwrap_or_default(),
            ..SolveOptions::default()
        };
        let grid = make_grid(p.horizon(), 400).unwrap();
        group.bench_function(name, |b| b.iter(|| solve(&p, &grid, &opts).unwrap()));
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let pf = load_catalog("exp_growth").unwrap();
    let p = pf.second_kind().unwrap().clone();
    let grid = make_grid(p.horizon(), 100).unwrap();
    c.bench_function("picard/exp_growth", |b| {
        b.iter(|| picard_solve(&p, &grid, &PicardOptions::default()).unwrap())
    });
}

fn lemma41(c: &mut Criterion) {
    let delta: Vec<i64> = (0..12).map(|j| j * 7 - 40).collect();
    c.bench_function("lemma41/n3_i12", |b| {
        b.iter(|| verify_lemma41_integer(3, 12, black_box(&delta)).unwrap())
    });
}

criterion_group!(benches, inner_sums, marching, picard, lemma41);
criterion_main!(benches);
