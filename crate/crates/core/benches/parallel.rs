//! Sequential versus rayon execution for the three data-parallel hot paths.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use edgezone::mc_oracle::{simulate_many, SimConfig};
use edgezone::queue_model::solve_paths;
use edgezone::{Exec, PathModel, Pmf, SolverConfig};

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn models() -> Vec<PathModel> {
    (0..8)
        .map(|i| {
            PathModel::simple(
                format!("p{i}"),
                Pmf::geometric_with_mean(10.0 + i as f64, 1).unwrap(),
                Pmf::uniform(1, 15).unwrap(),
                400,
            )
            .unwrap()
        })
        .collect()
}

fn convolve(c: &mut Criterion) {
    let a = Pmf::geometric_with_mean(600.0, 0).unwrap();
    let b = Pmf::uniform(0, 4000).unwrap();
    let mut g = c.benchmark_group("convolve");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| black_box(a.convolve_with(&b, 0.0, exec)))
        });
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let ms = models();
    let mut g = c.benchmark_group("solve_paths");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| black_box(solve_paths(&ms, &SolverConfig::default(), exec)))
        });
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let configs: Vec<_> = models()
        .into_iter()
        .enumerate()
        .map(|(i, m)| SimConfig::new(m, 200_000, i as u64))
        .collect();
    let mut g = c.benchmark_group("simulate_many");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| black_box(simulate_many(&configs, exec)))
        });
    }
    g.finish();
}

criterion_group!(benches, convolve, solve, simulate);
criterion_main!(benches);
