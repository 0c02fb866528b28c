use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use powerlap::graph::{shift_for_p, IsolatedNodes, MultilayerGraph};
use powerlap::krylov::{incomplete_cholesky, pcg_solve, CgOptions, Preconditioner};
use powerlap::matfree::{MatrixFreeConfig, MatrixFreeLp, ShiftedSolver};
use powerlap::msbm::{sample_msbm, LayerProbs, MsbmParams};
use powerlap::powermean::dense_power_mean_laplacian_with;

/// Two-class, two-layer graph with expected degree about 20.
fn graph(n: usize) -> MultilayerGraph {
    let size = n / 2;
    let p_in = 20.0 / (1.5 * size as f64);
    let params = MsbmParams::new(
        2,
        size,
        vec![LayerProbs::new(p_in, p_in / 2.0), LayerProbs::new(p_in * 0.75, p_in * 0.75)],
    )
    .unwrap();
    sample_msbm(&params, 7).unwrap()
}

fn rhs(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect()
}

fn spmv(c: &mut Criterion) {
    let mut group = c.benchmark_group("spmv");
    for n in [1_000, 10_000, 100_000] {
        let g = graph(n);
        let a = g.shifted_laplacians(0.3, IsolatedNodes::SelfLoop).unwrap().remove(0);
        let x = rhs(n);
        let mut y = vec![0.0; n];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| a.matrix().spmv_into(black_box(&x), &mut y))
        });
    }
    group.finish();
}

fn pcg(c: &mut Criterion) {
    let mut group = c.benchmark_group("pcg_ic");
    group.sample_size(20);
    for n in [1_000, 10_000] {
        let g = graph(n);
        let a = g.shifted_laplacians(0.3, IsolatedNodes::SelfLoop).unwrap().remove(0);
        let ic = incomplete_cholesky(a.matrix(), 1e-4).unwrap();
        let b_vec = rhs(n);
        let opts = CgOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| pcg_solve(a.matrix(), Some(&ic as &dyn Preconditioner), black_box(&b_vec), &opts).unwrap())
        });
    }
    group.finish();
}

fn apply_l_p(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_l_p");
    group.sample_size(10);
    for solver in [ShiftedSolver::Gmres, ShiftedSolver::Lanczos] {
        let n = 2_000;
        let g = graph(n);
        let cfg = MatrixFreeConfig {
            isolated: IsolatedNodes::SelfLoop,
            shifted_solver: solver,
            ..MatrixFreeConfig::default()
        };
        let op = MatrixFreeLp::new(&g, -1, &cfg).unwrap();
        let y = rhs(n);
        group.bench_function(BenchmarkId::new(format!("{solver:?}"), n), |b| {
            b.iter(|| op.apply_l_p(black_box(&y)).unwrap())
        });
    }
    group.finish();
}

fn dense_power_mean(c: &mut Criterion) {
    let mut group = c.benchmark_group("dense_power_mean");
    group.sample_size(10);
    for n in [200, 800] {
        let g = graph(n);
        for p in [-1.0, 1.0] {
            group.bench_function(BenchmarkId::new(format!("p={p}"), n), |b| {
                b.iter(|| dense_power_mean_laplacian_with(&g, p, shift_for_p(p), IsolatedNodes::SelfLoop).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, spmv, pcg, apply_l_p, dense_power_mean);
criterion_main!(benches);
