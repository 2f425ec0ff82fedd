//! Parallel vs sequential batch map over independent jobs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robba::config::RunConfig;
use robba::par;
use robba::verify::random_series;

fn sigma_batch(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let qp = cfg.qp();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = qp.int(7);
    let mut g = c.benchmark_group("sigma_batch");
    g.sample_size(10);
    for trunc in [16i64, 32] {
        let jobs: Vec<_> = (0..32).map(|_| random_series(qp, trunc, &mut rng)).collect();
        g.bench_with_input(BenchmarkId::new("parallel", trunc), &jobs, |b, jobs| {
            b.iter(|| par::map(jobs, |f| f.sigma(&a).expect("sigma")))
        });
        g.bench_with_input(BenchmarkId::new("sequential", trunc), &jobs, |b, jobs| {
            b.iter(|| par::map_seq(jobs, |f| f.sigma(&a).expect("sigma")))
        });
    }
    g.finish();
}

fn kernel_table(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let mut g = c.benchmark_group("scenario_table");
    g.sample_size(10);
    g.bench_function(if par::is_parallel() { "parallel" } else { "sequential" }, |b| {
        b.iter(|| robba::verify::scenario_table(&cfg))
    });
    g.finish();
}

criterion_group!(benches, sigma_batch, kernel_table);
criterion_main!(benches);
