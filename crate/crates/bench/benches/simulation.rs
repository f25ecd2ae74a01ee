use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use duopoly_bench::hyperbolic_market;
use duopoly_core::dde::default_step;
use duopoly_core::*;

fn perturbed_start(spec: &ModelSpec) -> StateVector {
    StateVector::from_array(solve(spec).unwrap().state.to_array().map(|v| 1.05 * v))
}

fn integrate_stable(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate_t50");
    group.sample_size(20);
    for tau in [0.0, 1.0, 10.0] {
        let spec = hyperbolic_market(tau);
        let start = perturbed_start(&spec);
        group.bench_with_input(BenchmarkId::from_parameter(tau), &tau, |b, &tau| {
            b.iter(|| integrate(black_box(&spec), start, 50.0, default_step(tau)).unwrap())
        });
    }
    group.finish();
}

fn equilibrium(c: &mut Criterion) {
    let spec = hyperbolic_market(1.0);
    c.bench_function("solve_equilibrium", |b| b.iter(|| solve(black_box(&spec)).unwrap()));
}

criterion_group!(benches, integrate_stable, equilibrium);
criterion_main!(benches);
