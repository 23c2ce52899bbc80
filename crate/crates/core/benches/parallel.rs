//! Compares the rayon-parallel trial loop against the sequential fallback
//! on representative workloads: a small sweep cell (one PhaseLift solve per
//! trial) and a Monte-Carlo kappa estimate.
//!
//! Build with the default features to bench both paths; without the
//! `parallel` feature only the sequential path is meaningful.

use criterion::{criterion_group, criterion_main, Criterion};
use phaseret::analytics::{kappa, KappaMode};
use phaseret::ensemble::Ensemble;
use phaseret::experiment::run_trial;
use phaseret::experiment::{ExperimentSpec, ProgramKind};
use phaseret::par;
use phaseret::rng::unit_sphere_vector;
use phaseret::signal::SignalSpec;

fn cell_spec() -> ExperimentSpec {
    ExperimentSpec {
        name: "bench-cell".into(),
        ensemble: Ensemble::Gaussian,
        signal: SignalSpec::flat(0.5, 10),
        n: 10,
        m_over_n: vec![8.0],
        noise_l1_over_m: vec![0.0],
        trials: 8,
        master_seed: 7,
        program: ProgramKind::Noisy,
        solver_max_iters: 800,
        solver_penalty: 1.0,
        solver_tol_per_m: 1e-6,
    }
}

fn bench_sweep_cell(c: &mut Criterion) {
    let spec = cell_spec();
    let m = 80;
    let mut group = c.benchmark_group("sweep_cell");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            par::run_indexed(spec.trials, |trial| {
                run_trial(&spec, 0, m, 0.0, trial).unwrap().rel_fro_err
            })
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::run_indexed_seq(spec.trials, |trial| {
                run_trial(&spec, 0, m, 0.0, trial).unwrap().rel_fro_err
            })
        })
    });
    group.finish();
}

fn bench_kappa_mc(c: &mut Criterion) {
    let v = unit_sphere_vector(24, 1);
    let w = unit_sphere_vector(24, 2);
    let e = Ensemble::erasure_theorem_preset();
    let mut group = c.benchmark_group("kappa_mc_200k");
    group.sample_size(10);
    // the chunked estimator routes through run_indexed, so the feature
    // decides whether chunks run on the rayon pool
    group.bench_function("chunked", |b| {
        b.iter(|| {
            kappa(
                &e,
                &v,
                &w,
                KappaMode::MonteCarlo {
                    samples: 200_000,
                    seed: 3,
                },
            )
            .unwrap()
            .value
        })
    });
    group.finish();
}

criterion_group!(benches, bench_sweep_cell, bench_kappa_mc);
criterion_main!(benches);
