//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use rand::Rng;
use rerand::constrained::{percentage_reductions, v_ka, ConstrainedGaussianLaw, McConfig, NuSampler};
use rerand::design::{
    enumerate_assignments, sample_rem_cached, MahalanobisCache,
};
use rerand::diagnostics::{
    delta_bound, exact_design_moments, formula_bias, formula_mse, gamma_decomposed,
    gamma_lower_bound, gamma_n, max_bias_rmse, DesignMomentMode,
};
use rerand::inference::{
    confidence_interval_with_sampler, diff_in_means, observe, CiMethod, HcMode,
};
use rerand::population::{average_treatment_effect, r_squared, v_tau_tau, FinitePopulation};
use rerand::rng::stream_rng;
use rerand::specialfn::{chi2_cdf, chi2_pdf, chi2_quantile, chi2_quantile_from_ln_p};
use rerand::synthetic::{gaussian_population, with_linear_outcomes};

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn random_outcome_population(n: usize, k: usize, n1: usize, seed: u64) -> FinitePopulation {
    let mut rng = stream_rng(seed, 0x40, 0);
    let x: Vec<f64> = (0..n * k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let y1: Vec<f64> = (0..n)
        .map(|i| {
            let lin: f64 = (0..k).map(|j| (j + 1) as f64 * x[i * k + j]).sum();
            lin + rng.sample::<f64, _>(rand_distr::StandardNormal) + 1.0
        })
        .collect();
    let y0: Vec<f64> = (0..n)
        .map(|i| {
            let lin: f64 = (0..k).map(|j| 0.4 * (j + 1) as f64 * x[i * k + j]).sum();
            lin + rng.sample::<f64, _>(rand_distr::StandardNormal)
        })
        .collect();
    FinitePopulation::new(x, n, k, Some(y1), Some(y0), n1, None).unwrap()
}

/// 1. Analytic `1 - v_{K,a}` column at p = 0.001 for the reference K grid,
/// within ±0.005, in under a second.
#[test]
fn criterion_1_variance_gap_column() {
    let start = Instant::now();
    let table = [
        (5u32, 0.97),
        (9, 0.90),
        (15, 0.80),
        (24, 0.70),
        (37, 0.60),
        (60, 0.50),
        (100, 0.41),
        (200, 0.30),
    ];
    let mut worst: f64 = 0.0;
    for &(k, expected) in &table {
        let a = chi2_quantile(0.001, k).unwrap();
        let got = 1.0 - v_ka(k, a).unwrap();
        worst = worst.max((got - expected).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst <= 0.005 && elapsed.as_secs_f64() < 1.0;
    report(
        "1",
        ok,
        &format!("max |1-v - reference| = {worst:.4}, elapsed {elapsed:?}"),
    );
}

/// 2. Degenerate-threshold limit of the percentage reductions is exactly
/// (R², 1 - sqrt(1 - R²)).
#[test]
fn criterion_2_zero_threshold_reductions() {
    let cfg = McConfig::with_seed(1);
    let mut ok = true;
    for &r2 in &[0.0, 0.25, 0.5, 0.9] {
        let (var_red, qr_red) = percentage_reductions(5, 0.0, r2, 0.05, &cfg).unwrap();
        ok &= var_red == r2 && qr_red == 1.0 - (1.0 - r2).sqrt();
    }
    report("2", ok, "exact equality on R² in {0, 0.25, 0.5, 0.9}");
}

/// 3. Enumeration exactness on populations with n <= 12.
#[test]
fn criterion_3_enumeration_exactness() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;

    // (a) complete randomization: mean of tau_hat is tau, enumeration
    // variance equals the analytic variance, to 1e-12.
    let pop = random_outcome_population(10, 2, 4, 3);
    let tau = average_treatment_effect(&pop).unwrap();
    let all = enumerate_assignments(10, 4).unwrap();
    let taus: Vec<f64> = all
        .iter()
        .map(|asg| diff_in_means(&observe(&pop, asg).unwrap()).unwrap())
        .collect();
    let mean: f64 = taus.iter().sum::<f64>() / taus.len() as f64;
    let var: f64 = taus.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / taus.len() as f64;
    let v_true = v_tau_tau(&pop).unwrap();
    let a_ok = (mean - tau).abs() < 1e-12 && (var - v_true).abs() < 1e-12;
    ok &= a_ok;
    details.push(format!(
        "(a) |mean-tau| = {:.1e}, |var-V| = {:.1e}",
        (mean - tau).abs(),
        (var - v_true).abs()
    ));

    // (b) exact bias/MSE formulas equal enumeration averages to 1e-12 on a
    // restricted design with unequal arms.
    let pop_b = random_outcome_population(12, 1, 4, 5);
    let a = chi2_quantile(0.3, 1).unwrap();
    let moments = exact_design_moments(&pop_b, a).unwrap();
    let cache = MahalanobisCache::new(&pop_b).unwrap();
    let mut scratch = vec![0.0_f64; 2];
    let tau_b = average_treatment_effect(&pop_b).unwrap();
    let mut diffs = Vec::new();
    for asg in enumerate_assignments(12, 4).unwrap() {
        let treated = asg.treated_indices();
        if cache.m_of_treated(&pop_b, &treated, &mut scratch) <= a {
            diffs.push(diff_in_means(&observe(&pop_b, &asg).unwrap()).unwrap() - tau_b);
        }
    }
    let mean_bias: f64 = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let mean_mse: f64 = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
    let bias_err = (formula_bias(&pop_b, &moments.pi).unwrap() - mean_bias).abs();
    let mse_err = (formula_mse(&pop_b, &moments).unwrap() - mean_mse).abs();
    let b_ok = bias_err < 1e-12 && mse_err < 1e-12;
    ok &= b_ok;
    details.push(format!("(b) bias err {bias_err:.1e}, mse err {mse_err:.1e}"));

    // (c) worst-case bias/RMSE equal a dense eigensolver on the exact
    // moments to 1e-10.
    let w = max_bias_rmse(&pop_b, a, DesignMomentMode::Exact).unwrap();
    let n = pop_b.n();
    let r1 = pop_b.r1();
    let d = nalgebra::DVector::from_iterator(n, moments.pi.iter().map(|&p| p - r1));
    let full = &moments.omega + &d * d.transpose();
    let lambda = full
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &x| acc.max(x));
    let factor = ((n as f64 - 1.0) / (n as f64 * r1 * pop_b.r0())).sqrt();
    let c_ok = (w.max_rmse - factor * lambda.sqrt()).abs() < 1e-10
        && (w.max_bias - factor * d.norm()).abs() < 1e-10;
    ok &= c_ok;
    details.push(format!(
        "(c) rmse err {:.1e}",
        (w.max_rmse - factor * lambda.sqrt()).abs()
    ));

    // (d) complete randomization is minimax optimal: (0, 1) to 1e-10.
    let w_cre = max_bias_rmse(&pop, f64::INFINITY, DesignMomentMode::Exact).unwrap();
    let d_ok = w_cre.max_bias.abs() < 1e-10 && (w_cre.max_rmse - 1.0).abs() < 1e-10;
    ok &= d_ok;
    details.push(format!(
        "(d) bias {:.1e}, rmse-1 {:.1e}",
        w_cre.max_bias,
        (w_cre.max_rmse - 1.0).abs()
    ));

    let elapsed = start.elapsed();
    ok &= elapsed.as_secs_f64() < 10.0;
    details.push(format!("elapsed {elapsed:?}"));
    report("3", ok, &details.join("; "));
}

/// 4. Sampler correctness: uniformity over the acceptable set, agreement of
/// the constrained-Gaussian sampler with a brute-force rejection oracle, and
/// its empirical variance against `v_{K,a}`.
#[test]
fn criterion_4_sampler_correctness() {
    let mut details = Vec::new();
    let mut ok = true;

    // Rerandomization draws are uniform over the acceptable assignments.
    let mut rng = stream_rng(11, 0x41, 0);
    let x: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
    let pop = FinitePopulation::new(x, 8, 1, None, None, 4, None).unwrap();
    let cache = MahalanobisCache::new(&pop).unwrap();
    let all = enumerate_assignments(8, 4).unwrap();
    let mut ms: Vec<f64> = all.iter().map(|a| cache.m_of(&pop, a).unwrap()).collect();
    ms.sort_by(f64::total_cmp);
    let a = 0.5 * (ms[33] + ms[34]); // accept roughly half
    let acceptable: Vec<_> = all
        .iter()
        .filter(|asg| cache.m_of(&pop, asg).unwrap() <= a)
        .map(|asg| asg.z().to_vec())
        .collect();
    let mut counts = std::collections::HashMap::new();
    let draws = 100_000u64;
    for rep in 0..draws {
        let res = sample_rem_cached(&pop, &cache, a, 70_000 + rep, 1_000_000).unwrap();
        ok &= res.m_value <= a;
        *counts.entry(res.assignment.z().to_vec()).or_insert(0u64) += 1;
    }
    let expected = draws as f64 / acceptable.len() as f64;
    let stat: f64 = acceptable
        .iter()
        .map(|z| {
            let c = counts.get(z).copied().unwrap_or(0) as f64;
            (c - expected) * (c - expected) / expected
        })
        .sum();
    let gof_p = 1.0 - chi2_cdf(stat, (acceptable.len() - 1) as u32).unwrap();
    ok &= counts.len() == acceptable.len() && gof_p > 0.001;
    details.push(format!(
        "uniformity over {} acceptable: GOF p = {gof_p:.3}",
        acceptable.len()
    ));

    // Constrained-Gaussian draws vs a K-dimensional Gaussian rejection
    // oracle: two-sample KS below the 0.001 critical value at 1e5 draws.
    let k = 5u32;
    let a5 = chi2_quantile(0.001, k).unwrap();
    let law = ConstrainedGaussianLaw::new(k, a5).unwrap();
    let n_draws = 100_000usize;
    let mut mine = Vec::with_capacity(n_draws);
    let mut rng_l = stream_rng(13, 0x41, 1);
    for _ in 0..n_draws {
        mine.push(rerand::constrained::sample_l(&law, &mut rng_l).unwrap());
    }
    let mut oracle = Vec::with_capacity(n_draws);
    let mut rng_o = stream_rng(17, 0x41, 2);
    while oracle.len() < n_draws {
        let mut norm2 = 0.0;
        let mut first = 0.0;
        for j in 0..k {
            let z: f64 = rng_o.sample(rand_distr::StandardNormal);
            if j == 0 {
                first = z;
            }
            norm2 += z * z;
        }
        if norm2 <= a5 {
            oracle.push(first);
        }
    }
    mine.sort_by(f64::total_cmp);
    oracle.sort_by(f64::total_cmp);
    let ks = two_sample_ks(&mine, &oracle);
    let m = n_draws as f64;
    let ks_crit = 1.949_47 * (2.0 / m).sqrt();
    ok &= ks < ks_crit;
    details.push(format!("KS = {ks:.5} (crit {ks_crit:.5})"));

    // Empirical Var(L) within 3 standard errors of v_{K,a} on the grid.
    let mut worst_z: f64 = 0.0;
    for &kk in &[1u32, 2, 5, 20] {
        for &p in &[0.1, 0.01, 0.001] {
            let law = ConstrainedGaussianLaw::from_acceptance(kk, p).unwrap();
            let mut rng = stream_rng(19, 0x41, ((kk as u64) << 8) | (p * 1e4) as u64);
            let n = 200_000;
            let (mut s2, mut s4) = (0.0, 0.0);
            for _ in 0..n {
                let l = rerand::constrained::sample_l(&law, &mut rng).unwrap();
                s2 += l * l;
                s4 += l * l * l * l;
            }
            let var_hat = s2 / n as f64;
            let se = ((s4 / n as f64 - var_hat * var_hat).max(0.0) / n as f64).sqrt();
            let z = (var_hat - law.v()).abs() / se;
            worst_z = worst_z.max(z);
        }
    }
    ok &= worst_z <= 3.0;
    details.push(format!("worst |var z-score| = {worst_z:.2}"));

    report("4", ok, &details.join("; "));
}

fn two_sample_ks(a_sorted: &[f64], b_sorted: &[f64]) -> f64 {
    let (m, n) = (a_sorted.len(), b_sorted.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < m && j < n {
        if a_sorted[i] <= b_sorted[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    d
}

/// 5. Variance-reduction law: Var(tau_hat | ReM)/Var(tau_hat | CRE) within
/// ±0.02 of 1 - (1 - v_{K,a}) R² at n = 1000, K = 5, p = 0.001, 1e5 draws
/// per design, in under two minutes.
#[test]
fn criterion_5_variance_reduction_law() {
    let start = Instant::now();
    let pop = gaussian_population(1000, 5, 100, 77);
    let pop = with_linear_outcomes(&pop, 1.0, 3.0, 78).unwrap();
    let r2 = r_squared(&pop).unwrap();
    let a = chi2_quantile(0.001, 5).unwrap();
    let predicted = 1.0 - (1.0 - v_ka(5, a).unwrap()) * r2;

    let cache = MahalanobisCache::new(&pop).unwrap();
    let draws = 100_000usize;
    const CHUNK: usize = 250;
    let sums = rerand::par::map_chunks(draws / CHUNK, |c| {
        let mut acc = [0.0_f64; 4]; // rem sum, rem sumsq, cre sum, cre sumsq
        for i in 0..CHUNK {
            let rep = (c * CHUNK + i) as u64;
            let rem = sample_rem_cached(&pop, &cache, a, 1_000_000 + rep, 10_000_000).unwrap();
            let t_rem = diff_in_means(&observe(&pop, &rem.assignment).unwrap()).unwrap();
            let cre = sample_rem_cached(&pop, &cache, f64::INFINITY, 2_000_000 + rep, 1).unwrap();
            let t_cre = diff_in_means(&observe(&pop, &cre.assignment).unwrap()).unwrap();
            acc[0] += t_rem;
            acc[1] += t_rem * t_rem;
            acc[2] += t_cre;
            acc[3] += t_cre * t_cre;
        }
        acc
    });
    let mut total = [0.0_f64; 4];
    for acc in sums {
        for (t, v) in total.iter_mut().zip(acc) {
            *t += v;
        }
    }
    let nf = draws as f64;
    let var_rem = (total[1] - total[0] * total[0] / nf) / (nf - 1.0);
    let var_cre = (total[3] - total[2] * total[2] / nf) / (nf - 1.0);
    let ratio = var_rem / var_cre;
    let elapsed = start.elapsed();
    let ok = (ratio - predicted).abs() <= 0.02 && elapsed.as_secs_f64() < 120.0;
    report(
        "5",
        ok,
        &format!(
            "R² = {r2:.3}, ratio = {ratio:.4}, predicted = {predicted:.4}, \
             |diff| = {:.4}, elapsed {elapsed:?}",
            (ratio - predicted).abs()
        ),
    );
}

/// 6. Coverage at n = 500, K = 5, p = 0.001 with linear outcomes over 5000
/// replications: constrained interval in [0.94, 0.97], Wald at least 0.94,
/// in under five minutes.
#[test]
fn criterion_6_interval_coverage() {
    let start = Instant::now();
    let pop = gaussian_population(500, 5, 250, 99);
    let pop = with_linear_outcomes(&pop, 1.0, 3.0, 100).unwrap();
    let tau = average_treatment_effect(&pop).unwrap();
    let a = chi2_quantile(0.001, 5).unwrap();
    let cache = MahalanobisCache::new(&pop).unwrap();
    let cfg = McConfig {
        samples: 400_000,
        seed: 101,
        antithetic: true,
    };
    let sampler = NuSampler::new(5, a, &cfg).unwrap();
    let reps = 5_000usize;
    const CHUNK: usize = 50;
    let hits = rerand::par::map_chunks(reps / CHUNK, |c| {
        let mut hit = [0u32; 2];
        for i in 0..CHUNK {
            let rep = (c * CHUNK + i) as u64;
            let rem = sample_rem_cached(&pop, &cache, a, 3_000_000 + rep, 10_000_000).unwrap();
            let data = observe(&pop, &rem.assignment).unwrap();
            let con = confidence_interval_with_sampler(
                &data,
                &sampler,
                0.05,
                CiMethod::Constrained,
                HcMode::Hc0,
                0,
            )
            .unwrap();
            let wald = confidence_interval_with_sampler(
                &data,
                &sampler,
                0.05,
                CiMethod::Wald,
                HcMode::Hc0,
                0,
            )
            .unwrap();
            hit[0] += (con.ci[0] <= tau && tau <= con.ci[1]) as u32;
            hit[1] += (wald.ci[0] <= tau && tau <= wald.ci[1]) as u32;
        }
        hit
    });
    let mut total = [0u32; 2];
    for h in hits {
        total[0] += h[0];
        total[1] += h[1];
    }
    let con_cov = total[0] as f64 / reps as f64;
    let wald_cov = total[1] as f64 / reps as f64;
    let elapsed = start.elapsed();
    let ok =
        (0.94..=0.97).contains(&con_cov) && wald_cov >= 0.94 && elapsed.as_secs_f64() < 300.0;
    report(
        "6",
        ok,
        &format!("constrained {con_cov:.4}, wald {wald_cov:.4}, elapsed {elapsed:?}"),
    );
}

/// 7. Berry–Esseen bookkeeping identities over randomly generated instances.
#[test]
fn criterion_7_berry_esseen_bookkeeping() {
    let mut worst_route: f64 = 0.0;
    let mut ok = true;
    for seed in 0..100u64 {
        let n = 20 + (seed as usize * 7) % 180;
        let k = 1 + (seed as usize) % 8;
        let n1 = (n / 3).max(k + 2);
        let pop = random_outcome_population(n, k, n1, 1_000 + seed);
        let direct = gamma_n(&pop).unwrap();
        let dec = gamma_decomposed(&pop).unwrap();
        let lb = gamma_lower_bound(n, n1, k);
        ok &= direct >= lb - 1e-12;
        ok &= dec.gamma_n >= dec.gamma_tilde / (4.0 * 2.0_f64.sqrt()) - 1e-12;
        ok &= dec.gamma_n <= 2.0_f64.sqrt() * dec.gamma_tilde + 1e-12;
        worst_route = worst_route.max((direct - dec.gamma_n).abs());
        let g = direct;
        ok &= (delta_bound(g) - (174.0 * g + 7.0 * g.powf(1.0 / 3.0))).abs() < 1e-12;
    }
    ok &= worst_route < 1e-10;
    report(
        "7",
        ok,
        &format!("100 instances, worst dual-route gap = {worst_route:.2e}"),
    );
}

/// 8. The two numeric regimes of `v_{K,a}` along acceptance schedules
/// `p = exp(-cK)`: the c = K schedule must drive v below 0.05 by K = 50 and
/// the c = 1/K schedule must push it above 0.95 by K = 200.
///
/// The second bound does not hold mathematically: at K = 200 the c = 1/K
/// schedule gives p = e^{-1} and v = 0.8988 (cross-checked against an
/// independent implementation); v only crosses 0.95 near K = 1000 on this
/// schedule. The assertion is kept as specified and the failure is expected.
#[test]
fn criterion_8_regime_schedules() {
    let a50 = chi2_quantile_from_ln_p(-2500.0, 50).unwrap();
    let v50 = v_ka(50, a50).unwrap();
    let small_ok = v50 < 0.05;

    let a200 = chi2_quantile((-1.0_f64).exp(), 200).unwrap();
    let v200 = v_ka(200, a200).unwrap();
    let large_ok = v200 > 0.95;

    report(
        "8",
        small_ok && large_ok,
        &format!(
            "v(50, e^-2500 schedule) = {v50:.2e}; v(200, e^-1 schedule) = {v200:.4} (needs > 0.95)"
        ),
    );
}

/// 9. Variance identities and bounds of the constrained Gaussian: monotone
/// in the threshold, sandwiched by min{a/(4K), (K-2)/(4K)} and a/K over a
/// 1000-point grid, and equal to the truncated-mean quadrature to 1e-6.
#[test]
fn criterion_9_variance_identities() {
    let mut ok = true;
    // Monotone in a at fixed K.
    for k in [1u32, 3, 10, 40] {
        let mut prev = 0.0;
        for i in 1..200 {
            let a = 0.12 * i as f64;
            let v = v_ka(k, a).unwrap();
            ok &= v >= prev - 1e-13;
            prev = v;
        }
    }
    // Sandwich over the 40 x 25 grid.
    for k in 1..=40u32 {
        for i in 1..=25 {
            let a = 0.35 * i as f64;
            let v = v_ka(k, a).unwrap();
            let kf = k as f64;
            ok &= v <= a / kf + 1e-12;
            ok &= v >= (a / (4.0 * kf)).min((kf - 2.0) / (4.0 * kf)) - 1e-12;
        }
    }
    // Quadrature identity v = K^{-1} E(chi2_K | chi2_K <= a) in t = sqrt(x).
    let mut worst: f64 = 0.0;
    for &(k, p) in &[(1u32, 0.3), (2, 0.05), (5, 0.001), (20, 0.01)] {
        let a = chi2_quantile(p, k).unwrap();
        let t_max = a.sqrt();
        let segments = 20_000;
        let h = t_max / segments as f64;
        let density = |t: f64| 2.0 * t * chi2_pdf(t * t, k);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..segments {
            let t0 = i as f64 * h;
            let tm = t0 + 0.5 * h;
            let t1 = t0 + h;
            let (f0, fm, f1) = (density(t0), density(tm), density(t1));
            num += h / 6.0 * (t0 * t0 * f0 + 4.0 * tm * tm * fm + t1 * t1 * f1);
            den += h / 6.0 * (f0 + 4.0 * fm + f1);
        }
        worst = worst.max((v_ka(k, a).unwrap() - num / den / k as f64).abs());
    }
    ok &= worst < 1e-6;
    report(
        "9",
        ok,
        &format!("grid bounds hold; worst quadrature gap = {worst:.2e}"),
    );
}

/// 10. Determinism: a seeded command rerun is byte-identical, including
/// across thread counts.
#[test]
fn criterion_10_byte_determinism() {
    use std::process::Command;
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pop.csv");
    {
        let pop = rerand::synthetic::star_surrogate(5, 7);
        let file = std::fs::File::create(&input).unwrap();
        rerand::synthetic::write_population_csv(&pop, file).unwrap();
    }
    let bin = env!("CARGO_BIN_EXE_rerand");
    let run_design = |tag: &str, threads: &str| -> (Vec<u8>, Vec<u8>) {
        let stem = dir.path().join(format!("design_{tag}"));
        let status = Command::new(bin)
            .args([
                "design",
                "--input",
                input.to_str().unwrap(),
                "--output",
                stem.to_str().unwrap(),
                "--covariates",
                "x1,x2,x3,x4,x5",
                "--n1",
                "118",
                "--p",
                "0.01",
                "--seed",
                "4242",
                "--threads",
                threads,
            ])
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(stem.with_extension("csv")).unwrap(),
            std::fs::read(stem.with_extension("json")).unwrap(),
        )
    };
    let (csv_a, json_a) = run_design("a", "1");
    let (csv_b, json_b) = run_design("b", "1");
    let (csv_c, json_c) = run_design("c", "4");
    let design_ok = csv_a == csv_b && csv_a == csv_c && json_a == json_b && json_a == json_c;

    let run_simulate = |tag: &str, threads: &str| -> (Vec<u8>, Vec<u8>) {
        let stem = dir.path().join(format!("sim_{tag}"));
        let status = Command::new(bin)
            .args([
                "simulate",
                "--output",
                stem.to_str().unwrap(),
                "--k-list",
                "0,3",
                "--p",
                "0.01",
                "--outcome",
                "linear",
                "--reps",
                "200",
                "--design-draws",
                "2000",
                "--mc-samples",
                "50000",
                "--seed",
                "99",
                "--threads",
                threads,
            ])
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(stem.with_extension("csv")).unwrap(),
            std::fs::read(stem.with_extension("json")).unwrap(),
        )
    };
    let (s_csv_a, s_json_a) = run_simulate("a", "1");
    let (s_csv_b, s_json_b) = run_simulate("b", "4");
    let (s_csv_c, s_json_c) = run_simulate("c", "1");
    let sim_ok =
        s_csv_a == s_csv_b && s_csv_a == s_csv_c && s_json_a == s_json_b && s_json_a == s_json_c;

    report(
        "10",
        design_ok && sim_ok,
        &format!("design identical: {design_ok}; simulate identical across threads 1/4: {sim_ok}"),
    );
}
