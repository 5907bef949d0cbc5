use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cmp_core::subspace::{fit_cmp, fit_mpca, FitOptions};
use cmp_core::synth::{low_variance_discriminant, LowVarianceParams};

fn bench_fit(c: &mut Criterion) {
    let data = low_variance_discriminant(&LowVarianceParams::default(), 42).unwrap();
    let opts = FitOptions::default();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("cmp_4x4x4", |b| b.iter(|| fit_cmp(black_box(&data), &[4, 4, 4], &opts).unwrap()));
    group.bench_function("mpca_4x4x4", |b| b.iter(|| fit_mpca(black_box(&data.samples), &[4, 4, 4], &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_fit);
criterion_main!(benches);
