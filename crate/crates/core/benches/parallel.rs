//! Sequential versus rayon kernels on a Table-1-shaped instance.
//! Build with `--no-default-features` to confirm the fallback compiles;
//! in that build the parallel arm silently runs sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use svt_core::lanczos::PartialSvdParams;
use svt_core::shrink::shrink_sparse;
use svt_core::solver::{svt_complete, SvtConfig};
use svt_core::{generate, Execution, ProblemSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn kernels(c: &mut Criterion) {
    let p = generate(&ProblemSpec::square(2000, 10, 6.0, 7)).expect("instance");
    let obs = &p.obs;
    let (n1, n2) = obs.shape();
    let x: Vec<f64> = (0..n2).map(|j| ((j * 37) % 101) as f64 / 50.0 - 1.0).collect();
    let y: Vec<f64> = (0..n1).map(|i| ((i * 53) % 97) as f64 / 48.0 - 1.0).collect();

    let mut g = c.benchmark_group("sampled_apply");
    for (name, exec) in MODES {
        let mut out = vec![0.0; n1];
        g.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| obs.apply_into(exec, black_box(&x), &mut out).unwrap())
        });
        let mut out = vec![0.0; n2];
        g.bench_function(BenchmarkId::new("adjoint", name), |b| {
            b.iter(|| obs.apply_adjoint_into(exec, black_box(&y), &mut out).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("lowrank_project");
    for (name, exec) in MODES {
        let mut out = vec![0.0; obs.nnz()];
        g.bench_function(name, |b| {
            b.iter(|| p.m_true.add_project_into(obs, -1.0, &mut out, exec).unwrap())
        });
    }
    g.finish();

    // One shrinkage step as the solver sees it early on: Y = delta * P(M).
    let delta = 1.2 * (n1 * n2) as f64 / obs.nnz() as f64;
    let mut y_mat = obs.clone();
    y_mat.values_mut().iter_mut().for_each(|v| *v *= delta);
    let tau = 5.0 * n1 as f64;
    let mut g = c.benchmark_group("shrink_sparse");
    g.sample_size(10);
    for (name, exec) in MODES {
        let params = PartialSvdParams { exec, ..PartialSvdParams::default() };
        g.bench_function(name, |b| b.iter(|| shrink_sparse(&y_mat, tau, 15, 5, &params).unwrap()));
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let p = generate(&ProblemSpec::square(500, 10, 6.0, 11)).expect("instance");
    let (n1, n2) = p.obs.shape();
    let mut g = c.benchmark_group("svt_complete_20_iterations");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = SvtConfig::recommended(n1, n2, p.obs.nnz()).with_k_max(20);
        cfg.svd.exec = exec;
        g.bench_function(name, |b| b.iter(|| svt_complete(black_box(&p.obs), &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, kernels, solve);
criterion_main!(benches);
