use std::hint::black_box;

use centrank::centrality::{betweenness_all, closeness_all};
use centrank::eval::{kendall_tau, TauMode};
use centrank::generators::{generate, GeneratorSpec};
use centrank::rng::rng_from_seed;
use centrank::training::{Model, TrainingConfig};
use centrank::CentralityKind;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::seq::SliceRandom;

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact");
    group.sample_size(10);
    for n in [500, 2000] {
        let g = generate(&GeneratorSpec::ba(n, 3, 1)).unwrap();
        group.bench_with_input(BenchmarkId::new("brandes", n), &g, |b, g| {
            b.iter(|| betweenness_all(black_box(g)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("closeness", n), &g, |b, g| {
            b.iter(|| closeness_all(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn kendall(c: &mut Criterion) {
    let mut rng = rng_from_seed(3);
    let mut group = c.benchmark_group("kendall");
    for n in [1_000, 100_000] {
        let a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        b.shuffle(&mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &(a, b), |bench, (a, b)| {
            bench.iter(|| kendall_tau(black_box(a), black_box(b), TauMode::TauB).unwrap())
        });
    }
    group.finish();
}

fn forward(c: &mut Criterion) {
    let g = generate(&GeneratorSpec::ba(1000, 3, 2)).unwrap();
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    for metric in [CentralityKind::Closeness, CentralityKind::Betweenness] {
        let model = Model::new(TrainingConfig::desk(metric)).unwrap();
        group.bench_function(metric.short_name(), |b| b.iter(|| model.scores(black_box(&g)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, exact, kendall, forward);
criterion_main!(benches);
