//! Serial vs thread-pool sweep throughput on a downscaled grid. The numbers
//! are identical either way by construction; this measures the scheduling
//! overhead and the scaling headroom on wider machines.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rescon::harness::{run_experiment_serial, ExperimentConfig};
#[cfg(feature = "parallel")]
use rescon::harness::run_experiment_with_threads;

fn bench_cfg(runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        n: 30,
        legit: 24,
        radius: 0.3,
        regimes: vec![(0.7, 0.3), (0.55, 0.45)],
        gammas: vec![0.02, 0.1],
        horizon: 150,
        runs,
        seed: 13,
        ..ExperimentConfig::default()
    }
}

fn sweep_benches(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for &runs in &[4usize, 16] {
        let cfg = bench_cfg(runs);
        group.bench_with_input(BenchmarkId::new("serial", runs), &cfg, |b, cfg| {
            b.iter(|| run_experiment_serial(cfg).unwrap())
        });
        #[cfg(feature = "parallel")]
        for threads in [2usize, 4] {
            group.bench_with_input(
                BenchmarkId::new(format!("threads-{threads}"), runs),
                &cfg,
                |b, cfg| b.iter(|| run_experiment_with_threads(cfg, threads).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, sweep_benches);
criterion_main!(benches);
