use std::hint::black_box;

use berkcal::simulation::run_cell;
use berkcal::{fit_known_delta, fit_unknown_delta, fit_usual, SolverConfig, VarianceFormula};
use berkcal_bench::{dataset, small_cell};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn fits(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    for (n, k) in [(5, 2), (20, 20), (100, 100)] {
        let stats = dataset(n, k);
        let id = format!("n{n}_k{k}");
        group.bench_with_input(BenchmarkId::new("usual", &id), &stats, |b, s| b.iter(|| fit_usual(black_box(s))));
        group.bench_with_input(BenchmarkId::new("unknown_delta", &id), &stats, |b, s| {
            b.iter(|| fit_unknown_delta(black_box(s)))
        });
        let cfg = SolverConfig::default();
        group.bench_with_input(BenchmarkId::new("known_delta", &id), &stats, |b, s| {
            b.iter(|| fit_known_delta(black_box(s), 0.01, &cfg))
        });
    }
    group.finish();
}

fn variances(c: &mut Criterion) {
    let stats = dataset(20, 20);
    let params = fit_unknown_delta(&stats).unwrap().params();
    let design = stats.design();
    let mut group = c.benchmark_group("variance");
    for f in VarianceFormula::ALL {
        group.bench_function(f.name(), |b| b.iter(|| f.variance(black_box(&params), black_box(&design))));
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = small_cell();
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("cell_200_reps", |b| b.iter(|| run_cell(black_box(&cfg))));
    group.finish();
}

criterion_group!(benches, fits, variances, simulation);
criterion_main!(benches);
