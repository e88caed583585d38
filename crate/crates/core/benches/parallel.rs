//! Parallel-vs-sequential throughput on the Monte Carlo hot loops.
//!
//! The chunked executors produce bit-identical results for every worker
//! count, so these benches measure pure speedup: each case runs once inside
//! a single-thread pool and once on all cores. Building with
//! `--no-default-features` removes the parallel paths entirely; the
//! single-thread numbers here approximate that build to within the pool
//! overhead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rerand::constrained::{McConfig, NuSampler};
use rerand::design::{estimate_acceptance, sample_rem, AcceptanceMode, DesignSpec};
use rerand::diagnostics::{max_bias_rmse, DesignMomentMode};
use rerand::specialfn::chi2_quantile;
use rerand::synthetic::star_surrogate;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let cores = std::thread::available_parallelism().map_or(2, |n| n.get());
    [1usize, cores]
        .into_iter()
        .map(|t| {
            (
                format!("threads_{t}"),
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .expect("pool"),
            )
        })
        .collect()
}

fn bench_nu_sampler(c: &mut Criterion) {
    let mut group = c.benchmark_group("nu_sampler_generation");
    group.sample_size(10);
    let cfg = McConfig {
        samples: 200_000,
        seed: 1,
        antithetic: true,
    };
    let a = chi2_quantile(0.001, 5).unwrap();
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &cfg, |b, cfg| {
            pool.install(|| {
                b.iter(|| NuSampler::new(5, a, cfg).unwrap().effective_samples());
            });
        });
    }
    group.finish();
}

fn bench_acceptance_mc(c: &mut Criterion) {
    let mut group = c.benchmark_group("acceptance_monte_carlo");
    group.sample_size(10);
    let pop = star_surrogate(5, 7);
    let a = chi2_quantile(0.001, 5).unwrap();
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| {
                b.iter(|| {
                    estimate_acceptance(
                        &pop,
                        a,
                        AcceptanceMode::MonteCarlo {
                            draws: 100_000,
                            seed: 5,
                        },
                    )
                    .unwrap()
                    .p_hat
                });
            });
        });
    }
    group.finish();
}

fn bench_rem_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("rem_search_p001");
    group.sample_size(10);
    let pop = star_surrogate(5, 7);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| {
                let mut seed = 0u64;
                b.iter(|| {
                    seed += 1;
                    sample_rem(&pop, &DesignSpec::from_acceptance(0.001, seed))
                        .unwrap()
                        .draws_used
                });
            });
        });
    }
    group.finish();
}

fn bench_worst_case_power_iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("worst_case_mc_moments");
    group.sample_size(10);
    let pop = star_surrogate(5, 7);
    let a = chi2_quantile(0.01, 5).unwrap();
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| {
                b.iter(|| {
                    max_bias_rmse(
                        &pop,
                        a,
                        DesignMomentMode::MonteCarlo {
                            draws: 20_000,
                            seed: 3,
                        },
                    )
                    .unwrap()
                    .max_rmse
                });
            });
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_nu_sampler,
    bench_acceptance_mc,
    bench_rem_search,
    bench_worst_case_power_iteration
);
criterion_main!(benches);
