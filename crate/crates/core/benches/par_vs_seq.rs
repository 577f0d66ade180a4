//! Sequential against rayon execution of the two hot loops: the candidate
//! regressions of one screening pass and the replications of a Monte Carlo run.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ridgecast::mc::{run_mc, simulate_dgp, DgpConfig, McOptions, Psi};
use ridgecast::screen::{screen_with, ScreenConfig};
use ridgecast::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn screening(c: &mut Criterion) {
    let cfg = DgpConfig::new(200, 150, 105, 0.2, Psi::Identity, 1).unwrap();
    let data = simulate_dgp(&cfg, 150, 0).unwrap();
    let (y, off, cand) = (data.target(0..150), data.officials(0..150), data.candidates(0..150));
    let mut group = c.benchmark_group("screen_N200_T150");
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| screen_with(&y, &off, &cand, &ScreenConfig::Tau(0.1), exec).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let cfg = DgpConfig::new(150, 100, 105, 0.2, Psi::Identity, 1).unwrap();
    let mut group = c.benchmark_group("run_mc_N150_T100_20reps");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let opts = McOptions {
            replications: 20,
            exec,
            ..McOptions::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| run_mc(&cfg, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, screening, monte_carlo);
criterion_main!(benches);
