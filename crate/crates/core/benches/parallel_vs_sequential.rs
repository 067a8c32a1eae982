//! Data-parallel kernels against a one-thread pool.
//!
//! Build with `--no-default-features` to time the plain sequential code path
//! instead of rayon pinned to one thread.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trmf::data::{gen_synthetic, SyntheticConfig};
use trmf::model::{update_f, update_x};
use trmf::{fit, Hyperparams, LagSet};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", one), ("parallel", all)]
}

fn kernels(c: &mut Criterion) {
    let cfg = SyntheticConfig {
        n: 256,
        t_count: 512,
        k: 8,
        ..SyntheticConfig::default()
    };
    let truth = gen_synthetic(&cfg).unwrap();
    let data = truth.y;
    let ar = truth.w_true.clone();
    let lags = LagSet::synthetic_preset();

    let mut group = c.benchmark_group("update_f");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| update_f(black_box(&data), &truth.x_true, 0.5).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("update_x");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| {
                b.iter(|| update_x(black_box(&data), &truth.f_true, &ar, 0.5, 1.0, &truth.x_true, 1e-6, 200).unwrap())
            })
        });
    }
    group.finish();

    let small = gen_synthetic(&SyntheticConfig::default()).unwrap().y;
    let hyper = Hyperparams {
        max_outer_iters: 10,
        ..Hyperparams::default()
    };
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| fit(black_box(&small), &hyper, &lags).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
