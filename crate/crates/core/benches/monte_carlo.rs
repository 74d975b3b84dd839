//! Sequential vs data-parallel execution of the Monte Carlo workloads.
//! Build with `--no-default-features` to see the sequential fallback used
//! for both arms.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gasfee::derivatives::{price_monte_carlo, MonteCarloConfig, OptionKind, OptionSpec, Underlying};
use gasfee::fbm::{sample_fbm_batch, FbmMethod, FbmSpec};
use gasfee::fou::{simulate_fou, FouParams, SimGrid};
use gasfee::Execution;

const ARMS: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn fbm_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("fbm_batch_512x256");
    let spec = FbmSpec::new(0.7, 512, 1.0, FbmMethod::DaviesHarte, 1).unwrap();
    for (name, exec) in ARMS {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sample_fbm_batch(black_box(&spec), 256, exec).unwrap())
        });
    }
    group.finish();
}

fn fou_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("fou_paths_1000x256");
    let params = FouParams::constant(0.4, 3.2, 0.3, 0.7).unwrap();
    let grid = SimGrid::new(1000, 0.01).unwrap();
    for (name, exec) in ARMS {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_fou(black_box(&params), 3.2, grid, 256, 7, true, exec).unwrap())
        });
    }
    group.finish();
}

fn option_price(c: &mut Criterion) {
    let mut group = c.benchmark_group("degree_day_mc_4000");
    group.sample_size(20);
    let underlying = Underlying { params: FouParams::constant(0.5, 3.2, 0.3, 0.7).unwrap(), x0: 3.0, geometric: false };
    let spec = OptionSpec {
        kind: OptionKind::Call,
        strike_k: 3.2,
        strike_l: 0.0,
        discount_delta: 0.02,
        maturity: 2.0,
        window: 1.0,
        valuation_time: 0.0,
    };
    for (name, exec) in ARMS {
        let mut cfg = MonteCarloConfig::new(4000, 11);
        cfg.exec = exec;
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| price_monte_carlo(black_box(&spec), &underlying, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fbm_batch, fou_paths, option_price);
criterion_main!(benches);
