use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hammerflow::config::{ControlParams, DiscretizationConfig, PipelineConfig};
use hammerflow::exec::Execution;
use hammerflow::gradient::{evaluate_batch, fd_gradient_with};
use hammerflow::optimizer::initial_guess;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn setup() -> (PipelineConfig, DiscretizationConfig) {
    let cfg = PipelineConfig::benchmark();
    let disc = DiscretizationConfig::new(18, 10, 40, &cfg);
    (cfg, disc)
}

fn fd_gradient(c: &mut Criterion) {
    let (cfg, disc) = setup();
    let params = initial_guess(&cfg, &disc);
    let mut group = c.benchmark_group("fd_gradient");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fd_gradient_with(&cfg, &disc, black_box(&params), 1e-5, exec).unwrap())
        });
    }
    group.finish();
}

fn gradient_batch(c: &mut Criterion) {
    let (cfg, disc) = setup();
    let ramp = initial_guess(&cfg, &disc);
    // Same ramp with durations shifted between neighbouring segments.
    let points: Vec<ControlParams> = (0..16)
        .map(|i| {
            let mut p = ramp.clone();
            let k = i % (disc.segments - 1);
            let d = 0.01 * (1 + i / (disc.segments - 1)) as f64;
            p.theta[k] += d;
            p.theta[k + 1] -= d;
            p
        })
        .collect();
    let mut group = c.benchmark_group("gradient_batch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_batch(&cfg, &disc, black_box(&points), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, fd_gradient, gradient_batch);
criterion_main!(benches);
