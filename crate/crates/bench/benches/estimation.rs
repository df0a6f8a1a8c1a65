use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use custmix::clustering::kmeans;
use custmix::simulation::{benchmark_parameters, run_replication, scenario_catalog};
use custmix::{mixture_probabilities, mle_estimate, OptimizerSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_mle(c: &mut Criterion) {
    let config = benchmark_parameters();
    let p = mixture_probabilities(&config.r0, &config.q).unwrap();
    let x: Vec<u64> = p.iter().map(|v| (v * 1e6).round() as u64).collect();
    let settings = OptimizerSettings::default();
    c.bench_function("mle_estimate/6x3", |b| {
        b.iter(|| mle_estimate(black_box(&x), black_box(&config.r0), &settings).unwrap())
    });
}

fn bench_kmeans(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut group = c.benchmark_group("kmeans");
    for &n in &[1_000usize, 10_000] {
        let points: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let shift = (i % 4) as f64 * 3.0;
                (0..4).map(|_| shift + rng.random::<f64>()).collect()
            })
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &points, |b, pts| {
            b.iter(|| kmeans(black_box(pts), 4, 1, 10).unwrap())
        });
    }
    group.finish();
}

fn bench_replication(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_replication");
    for config in scenario_catalog().into_iter().filter(|c| ["ii", "viii", "ix"].contains(&c.label.as_str())) {
        group.bench_function(config.label.clone(), |b| {
            let mut index = 0usize;
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
                rng.set_stream(index as u64);
                index += 1;
                run_replication(&config, index, &mut rng).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_mle, bench_kmeans, bench_replication);
criterion_main!(benches);
