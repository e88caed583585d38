//! Synthetic populations for simulations and tests.
//!
//! The flagship generator mimics the shape of a university-experiment
//! roster: 974 units with a heavily unbalanced allocation (118 treated), five
//! "administrative" covariates (a GPA-like score, an age-like count, three
//! binary indicators) and, beyond the fifth column, independent heavy-tailed
//! t2 noise covariates. Everything is a pure function of its seed.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::population::FinitePopulation;
use crate::rng::{stream_rng, DOMAIN_SYNTHETIC};
use crate::Result;

/// Row count of the surrogate roster.
pub const SURROGATE_N: usize = 974;
/// Planned treated-group size of the surrogate roster.
pub const SURROGATE_N1: usize = 118;

/// Student-t draw with 2 degrees of freedom: normal over sqrt(chi2_2 / 2).
fn t2(rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let u: f64 = 1.0 - rng.random::<f64>();
    let chi2_2 = -2.0 * u.ln();
    z / (chi2_2 / 2.0).sqrt()
}

/// t2 quantile function (closed form); the heavy-tailed transform used by
/// the adversarial outcome model.
pub fn t2_quantile(p: f64) -> f64 {
    let s = 2.0 * p - 1.0;
    2.0_f64.sqrt() * s / (1.0 - s * s).sqrt()
}

/// A 974-unit roster with `k` covariates: five survey-style columns followed
/// by independent t2 noise columns. `k < 5` keeps a prefix of the five.
pub fn star_surrogate(k: usize, seed: u64) -> FinitePopulation {
    let n = SURROGATE_N;
    let mut rng = stream_rng(seed, DOMAIN_SYNTHETIC, 0);
    let mut covariates = Vec::with_capacity(n * k);
    for _ in 0..n {
        let gpa = (78.0 + 9.0 * rng.sample::<f64, _>(StandardNormal)).clamp(50.0, 100.0);
        let age = 18.0 + (rng.random::<f64>() * 4.0).floor();
        let female = (rng.random::<f64>() < 0.57) as u8 as f64;
        let at_home = (rng.random::<f64>() < 0.30) as u8 as f64;
        let no_procrastinate = (rng.random::<f64>() < 0.40) as u8 as f64;
        let base = [gpa, age, female, at_home, no_procrastinate];
        covariates.extend_from_slice(&base[..k.min(5)]);
        for _ in 5..k.max(5) {
            covariates.push(t2(&mut rng));
        }
    }
    FinitePopulation::new(covariates, n, k, None, None, SURROGATE_N1, None)
        .expect("surrogate dimensions are valid")
}

/// Gaussian covariate population of arbitrary shape.
pub fn gaussian_population(n: usize, k: usize, n1: usize, seed: u64) -> FinitePopulation {
    let mut rng = stream_rng(seed, DOMAIN_SYNTHETIC, 1);
    let covariates: Vec<f64> = (0..n * k).map(|_| rng.sample(StandardNormal)).collect();
    FinitePopulation::new(covariates, n, k, None, None, n1, None)
        .expect("gaussian population dimensions are valid")
}

/// Attaches linear potential outcomes `Y(0) = beta^T x + noise_sd * e`,
/// `Y(1) = Y(0) + tau`, sharing the noise across arms so individual effects
/// are exactly constant. The realized squared multiple correlation is
/// measurable afterwards with [`crate::population::r_squared`]; `noise_sd`
/// tunes it.
pub fn with_linear_outcomes(
    pop: &FinitePopulation,
    tau: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<FinitePopulation> {
    let mut rng = stream_rng(seed, DOMAIN_SYNTHETIC, 2);
    let n = pop.n();
    let k = pop.k();
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for i in 0..n {
        let lin: f64 = pop
            .row(i)
            .iter()
            .enumerate()
            .map(|(j, &x)| (1.0 + 0.3 * j as f64) * x)
            .sum();
        let e: f64 = rng.sample(StandardNormal);
        let base = lin + noise_sd * e;
        y0.push(base);
        y1.push(base + tau);
    }
    let _ = k;
    pop.with_outcomes(y1, y0)
}

/// Mirror outcomes: both potential outcomes equal one baseline variable
/// loosely tied to the first covariate, so the true effect is exactly zero
/// and the estimand-side variance estimators are conservative-by-structure.
pub fn with_mirror_outcomes(pop: &FinitePopulation, seed: u64) -> Result<FinitePopulation> {
    let mut rng = stream_rng(seed, DOMAIN_SYNTHETIC, 3);
    let n = pop.n();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let anchor = if pop.k() > 0 { pop.row(i)[0] } else { 0.0 };
            0.02 * anchor + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    pop.with_outcomes(y.clone(), y)
}

/// Adversarial outcomes: each unit's averaged treatment propensity across the
/// supplied designs, rank-transformed through the heavy-tailed t2 quantile.
/// Units that rerandomization systematically favors or avoids end up in the
/// far tails, which is exactly the configuration that stresses the Gaussian
/// approximation.
pub fn with_propensity_outcomes(
    pop: &FinitePopulation,
    propensity_sets: &[Vec<f64>],
) -> Result<FinitePopulation> {
    let n = pop.n();
    assert!(!propensity_sets.is_empty());
    let mut avg = vec![0.0_f64; n];
    for set in propensity_sets {
        assert_eq!(set.len(), n);
        for (a, &p) in avg.iter_mut().zip(set) {
            *a += p;
        }
    }
    for a in &mut avg {
        *a /= propensity_sets.len() as f64;
    }
    // Rank transform to (0,1), then map through the t2 quantile.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| avg[i].total_cmp(&avg[j]).then(i.cmp(&j)));
    let mut y = vec![0.0_f64; n];
    for (rank, &i) in order.iter().enumerate() {
        y[i] = t2_quantile((rank as f64 + 1.0) / (n as f64 + 1.0));
    }
    pop.with_outcomes(y.clone(), y)
}

/// Writes a population as a CSV with headers `x1..xK[,y1,y0]`.
pub fn write_population_csv<W: Write>(pop: &FinitePopulation, mut out: W) -> Result<()> {
    let k = pop.k();
    let mut header: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();
    let has_outcomes = pop.y1().is_some() && pop.y0().is_some();
    if has_outcomes {
        header.push("y1".into());
        header.push("y0".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..pop.n() {
        let mut fields: Vec<String> = pop.row(i).iter().map(|v| format!("{v}")).collect();
        if has_outcomes {
            fields.push(format!("{}", pop.y1().unwrap()[i]));
            fields.push(format!("{}", pop.y0().unwrap()[i]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{load_population, r_squared, TableSchema};

    #[test]
    fn surrogate_shape_and_determinism() {
        let a = star_surrogate(9, 42);
        assert_eq!(a.n(), 974);
        assert_eq!(a.n1(), 118);
        assert_eq!(a.n0(), 856);
        assert_eq!(a.k(), 9);
        let b = star_surrogate(9, 42);
        assert_eq!(a.row(500), b.row(500));
        let c = star_surrogate(9, 43);
        assert_ne!(a.row(500), c.row(500));
    }

    #[test]
    fn surrogate_round_trips_through_csv() {
        let pop = star_surrogate(5, 7);
        let mut buf = Vec::new();
        write_population_csv(&pop, &mut buf).unwrap();
        let schema = TableSchema {
            covariates: (1..=5).map(|j| format!("x{j}")).collect(),
            ..Default::default()
        };
        let reloaded = load_population(buf.as_slice(), &schema, SURROGATE_N1).unwrap();
        assert_eq!(reloaded.n(), 974);
        assert_eq!(reloaded.n1(), 118);
        for i in [0, 117, 973] {
            for j in 0..5 {
                assert!((reloaded.row(i)[j] - pop.row(i)[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_outcomes_reach_target_r2_range() {
        let pop = gaussian_population(1000, 5, 100, 3);
        let with = with_linear_outcomes(&pop, 1.0, 2.0, 4).unwrap();
        let r2 = r_squared(&with).unwrap();
        // noise_sd = 2 against unit-variance covariates lands mid-range.
        assert!(r2 > 0.3 && r2 < 0.9, "r2 = {r2}");
    }

    #[test]
    fn t2_quantile_symmetry() {
        assert_eq!(t2_quantile(0.5), 0.0);
        for &p in &[0.01, 0.2, 0.4] {
            assert!((t2_quantile(p) + t2_quantile(1.0 - p)).abs() < 1e-12);
        }
        assert!(t2_quantile(0.999) > 20.0);
    }
}
