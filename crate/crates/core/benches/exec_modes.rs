//! Sequential against rayon-parallel execution of the data-parallel stages.
//! Both modes produce identical results; only wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tgc_core::metrics::kmeans;
use tgc_core::pretrain::generate_walks;
use tgc_core::{synth, train, EmbeddingTable, Exec, SynthConfig, TemporalGraph, TrainConfig, WalkConfig};

const MODES: [Exec; 2] = [Exec::Sequential, Exec::Parallel];

fn planted() -> TemporalGraph {
    synth::generate(&SynthConfig {
        n_events: 5000,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn features(n: usize, dim: usize) -> EmbeddingTable {
    let data = (0..n * dim).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
    EmbeddingTable::from_vec(n, dim, data)
}

fn bench_train_epoch(c: &mut Criterion) {
    let g = planted();
    let z0 = features(g.num_nodes(), 64);
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    for exec in MODES {
        let cfg = TrainConfig {
            clusters: 4,
            epochs: 1,
            exec,
            ..TrainConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(exec), &cfg, |b, cfg| {
            b.iter(|| train(&g, &z0, cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_walks(c: &mut Criterion) {
    let edges = planted().static_projection();
    let mut group = c.benchmark_group("node2vec_walks");
    group.sample_size(10);
    for exec in MODES {
        let cfg = WalkConfig {
            walks_per_node: 4,
            walk_length: 40,
            p: 0.5,
            q: 2.0,
            exec,
            ..WalkConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(exec), &cfg, |b, cfg| {
            b.iter(|| generate_walks(&edges, cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_kmeans(c: &mut Criterion) {
    let z = features(2000, 32);
    let mut group = c.benchmark_group("kmeans_restarts");
    group.sample_size(10);
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(exec), &exec, |b, &exec| {
            b.iter(|| kmeans(&z, 8, 0, 10, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_train_epoch, bench_walks, bench_kmeans);
criterion_main!(benches);
