use ace_bench::{dataset, scenario};
use ace_core::ace::{ie_approx_default, ie_exact, sweep_feedforward, Method};
use ace_core::net::DEFAULT_HESSIAN_CAP;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn expectation(c: &mut Criterion) {
    let mut group = c.benchmark_group("interventional_expectation");
    group.sample_size(10);
    for k in [20, 100, 400] {
        let (net, m) = scenario(k, &[256, 64], 1);
        group.bench_with_input(BenchmarkId::new("exact", k), &k, |b, _| {
            b.iter(|| ie_exact(&net, &m, 0, black_box(0.3), 0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("approx", k), &k, |b, _| {
            b.iter(|| ie_approx_default(&net, &m, 0, black_box(0.3), 0).unwrap())
        });
    }
    group.finish();
}

fn hessian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hessian");
    group.sample_size(10);
    for k in [20, 100] {
        let (net, m) = scenario(k, &[256, 64], 2);
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| net.hessian_capped(m.mu.view(), 0, DEFAULT_HESSIAN_CAP).unwrap())
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_50");
    group.sample_size(10);
    let (net, _) = scenario(20, &[64, 32], 3);
    let data = dataset(500, 20, 4);
    for method in [Method::ExactTaylor, Method::ApproxDirectional, Method::Oracle] {
        group.bench_function(method.name(), |b| b.iter(|| sweep_feedforward(&net, &data, 0, 50, 0, method).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, expectation, hessian, sweeps);
criterion_main!(benches);
