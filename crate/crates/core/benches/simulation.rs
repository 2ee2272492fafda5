//! Simulation and classification on a one-thread pool against the default
//! pool. Build with `--no-default-features` to time the sequential fallback.

use arbkit::arbitrage::{classify, ClassifyConfig};
use arbkit::models::{simulate, DensitySpec, ModelSpec};
use arbkit::par;
use arbkit::paths::TimeGrid;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pools() -> [(&'static str, Option<usize>); 2] {
    [("one_thread", Some(1)), ("default_pool", None)]
}

fn bench_simulate(c: &mut Criterion) {
    let grid = TimeGrid::uniform(1.0, 1024).unwrap();
    let model = ModelSpec::Bes3 { x0: 1.0 };
    let mut group = c.benchmark_group("simulate_bes3_1024x2000");
    group.sample_size(10);
    for (label, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| par::with_threads(threads, || simulate(&model, &grid, 2000, 1).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn bench_classify(c: &mut Criterion) {
    let grid = TimeGrid::uniform(1.0, 512).unwrap();
    let cfg = ClassifyConfig::new(ModelSpec::StoppedBm { s0: 1.0 }, grid, 1024, 1).under(DensitySpec::PriceItself);
    let mut group = c.benchmark_group("classify_stopped_bm_q_512x1024");
    group.sample_size(10);
    for (label, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| par::with_threads(threads, || classify(&cfg).unwrap()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_classify);
criterion_main!(benches);
