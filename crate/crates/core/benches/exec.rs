//! Sequential versus parallel execution of the data-parallel kernels.
//! Build with `--no-default-features` to see the fallback: both policies then
//! run the same sequential loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use entroflow::evolution::{convolve_green_with, trajectory_rows, Lattice, SampleSettings, Trajectory};
use entroflow::field::estimate_bounds_exec;
use entroflow::lab::{inequality_sweep, random_admissible, SweepConfig};
use entroflow::{DenseGrid, Exec};
use std::hint::black_box;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("inequality_sweep");
    g.sample_size(10);
    let cfg = SweepConfig {
        dim: 1,
        n: 3,
        ps: vec![1.25, 1.5, 2.0],
        eps: 0.3,
        max_degree: 5,
        quad_order: None,
        seeds: (0..64).collect(),
    };
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| inequality_sweep(black_box(&cfg), exec).unwrap()));
    }
    g.finish();
}

fn trajectory(c: &mut Criterion) {
    let mut g = c.benchmark_group("trajectory_rows");
    g.sample_size(10);
    let a = random_admissible(2, 2, 0.3, 6, 1).unwrap();
    let times: Vec<f64> = (0..32).map(|i| 0.0625 * i as f64).collect();
    let traj = Trajectory::sample(&a.field, &times).unwrap();
    for (name, exec) in POLICIES {
        let settings = SampleSettings { exec, ..SampleSettings::for_field(&a.field) };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| trajectory_rows(black_box(&traj), &[1.5, 2.0], &settings).unwrap())
        });
    }
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("bounds_2d");
    g.sample_size(10);
    let a = random_admissible(2, 3, 0.3, 8, 2).unwrap();
    let grid = DenseGrid::for_degree(8, 2);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate_bounds_exec(black_box(&a.field), &grid, None, exec).unwrap())
        });
    }
    g.finish();
}

fn green(c: &mut Criterion) {
    let mut g = c.benchmark_group("green_convolution_2d");
    g.sample_size(10);
    let input = Lattice::new(2, 10.0, 201).unwrap();
    let out = Lattice::new(2, 15.0, 201).unwrap();
    let u0: Vec<f64> = (0..input.len()).map(|i| entroflow::evolution::stationary_gaussian(&input.point(i))).collect();
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| convolve_green_with(black_box(&u0), &input, 0.5, &out, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sweep, trajectory, bounds, green);
criterion_main!(benches);
