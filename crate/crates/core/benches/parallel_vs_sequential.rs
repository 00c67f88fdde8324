//! Parallel vs. sequential throughput on the data-parallel inner loops:
//! batches of independent forward simulations, ABC fitting, and
//! multi-seed fits. With the default `parallel` feature both modes are
//! measured; built with `--no-default-features` the two series coincide
//! (Parallel degrades to sequential).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use bcm_core::abc::{fit_abc, summarize, AbcOptions};
use bcm_core::abm::{simulate, LatentParams, ModelConfig, Variant};
use bcm_core::exec::{map_indexed, ExecMode};

const MODES: [(ExecMode, &str); 2] = [
    (ExecMode::Sequential, "sequential"),
    (ExecMode::Parallel, "parallel"),
];

fn bench_simulate_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_batch_bcmb");
    for (mode, name) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                let sums = map_indexed(mode, 64, |i| {
                    let config = ModelConfig::new(Variant::Bcmb, 50, 64, i as u64);
                    let traj = simulate(&config, &LatentParams::bcmb(0.25, 0.75)).unwrap();
                    summarize(&traj)
                        .pos_counts
                        .iter()
                        .map(|&c| u64::from(c))
                        .sum::<u64>()
                });
                black_box(sums)
            })
        });
    }
    group.finish();
}

fn bench_abc_fit(c: &mut Criterion) {
    let config = ModelConfig::new(Variant::Bcmb, 30, 64, 7);
    let observed = simulate(&config, &LatentParams::bcmb(0.25, 0.75)).unwrap();
    let mut group = c.benchmark_group("abc_fit_bcmb");
    group.sample_size(10);
    for (mode, name) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                let fit = fit_abc(
                    &observed,
                    &AbcOptions {
                        n_sims: 200,
                        ..Default::default()
                    },
                    mode,
                    None,
                )
                .unwrap();
                black_box(fit.threshold)
            })
        });
    }
    group.finish();
}

fn bench_multi_seed_svi_fits(c: &mut Criterion) {
    use bcm_core::pgabm::PgabmConfig;
    use bcm_core::svi::{fit_svi, SviHyperparams};
    let config = ModelConfig::new(Variant::Bcmb, 40, 32, 3);
    let observed = simulate(&config, &LatentParams::bcmb(0.25, 0.75)).unwrap();
    let mut group = c.benchmark_group("svi_fits_multi_seed");
    group.sample_size(10);
    for (mode, name) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                // Independent fits (replicate seeds of one grid cell);
                // each single fit is inherently sequential.
                let finals = map_indexed(mode, 4, |seed| {
                    let hyper = SviHyperparams {
                        n_epochs: 60,
                        ..Default::default()
                    }
                    .with_seed(seed as u64);
                    fit_svi(&observed, &PgabmConfig::default(), &hyper, None)
                        .unwrap()
                        .elbo_trace
                        .last()
                        .copied()
                });
                black_box(finals)
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_simulate_batch,
    bench_abc_fit,
    bench_multi_seed_svi_fits
);
criterion_main!(benches);
