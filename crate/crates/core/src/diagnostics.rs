//! Design diagnostics: the Berry–Esseen quantity `gamma_n`, its residual +
//! leverage decomposition, the computable bound on the Gaussian-approximation
//! error, the confidence-interval regularity quantity, and worst-case
//! bias/RMSE of a design over all outcome configurations.
//!
//! Exact design moments come from enumeration restricted to the acceptable
//! assignments; Monte Carlo moments store the simulated draws bit-packed and
//! apply the covariance operator matrix-free inside power iteration, keeping
//! memory at O(R n) rather than O(n^2).

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::design::{enumerate_assignments, MahalanobisCache};
use crate::linalg::sym_inv_sqrt;
use crate::par;
use crate::population::{
    covariate_moments, leverage_scores, residual_variance, FinitePopulation, LeverageReport,
};
use crate::rng::{stream_rng, DOMAIN_DESIGN_MC, DOMAIN_POWER_RESTART};
use crate::{Error, Result};

/// Everything the pre-experiment diagnosis produces. Outcome-dependent fields
/// are absent when the population carries no potential outcomes.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub gamma_n: Option<f64>,
    pub gamma_tilde: Option<f64>,
    /// Universal lower bound `2^{-3/2} (n r1 r0)^{-1/2} (K+1)^{7/4}`.
    pub gamma_lower_bound: f64,
    /// `174 gamma + 7 gamma^{1/3}`, when gamma is available.
    pub delta_bound: Option<f64>,
    /// `n^{-1} sum |e_i|^3` of the standardized combined residuals.
    pub residual_third_moment: Option<f64>,
    pub leverage: LeverageReport,
    pub condition6: Option<f64>,
    pub max_bias: Option<f64>,
    pub max_rmse: Option<f64>,
}

fn both_outcomes(pop: &FinitePopulation) -> Result<(&[f64], &[f64])> {
    match (pop.y1(), pop.y0()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::validation(
            "diagnostic requires both potential outcomes",
        )),
    }
}

/// `2^{-3/2} (n r1 r0)^{-1/2} (K+1)^{7/4}` — the floor no population can beat.
pub fn gamma_lower_bound(n: usize, n1: usize, k: usize) -> f64 {
    let nf = n as f64;
    let r1 = n1 as f64 / nf;
    let r0 = 1.0 - r1;
    (0.125_f64).sqrt() / (nf * r1 * r0).sqrt() * ((k + 1) as f64).powf(1.75)
}

/// Dimension-weighted third moment of the standardized population of
/// `(r0 Y(1) + r1 Y(0), X)` vectors, via a symmetric inverse square root.
pub fn gamma_n(pop: &FinitePopulation) -> Result<f64> {
    let (y1, y0) = both_outcomes(pop)?;
    let (n, k) = (pop.n(), pop.k());
    let (r1, r0) = (pop.r1(), pop.r0());
    let dim = k + 1;

    let mut u = DMatrix::zeros(n, dim);
    for i in 0..n {
        u[(i, 0)] = r0 * y1[i] + r1 * y0[i];
        for j in 0..k {
            u[(i, j + 1)] = pop.row(i)[j];
        }
    }
    let mean = u.row_mean();
    for i in 0..n {
        for j in 0..dim {
            u[(i, j)] -= mean[j];
        }
    }
    let cov = u.transpose() * &u / (n - 1) as f64;
    let w = sym_inv_sqrt(&cov)?;
    let standardized = &u * &w;
    let sum3: f64 = (0..n)
        .map(|i| {
            let norm2: f64 = (0..dim).map(|j| standardized[(i, j)].powi(2)).sum();
            norm2.powf(1.5)
        })
        .sum();
    Ok((dim as f64).powf(0.25) / (n as f64 * r1 * r0).sqrt() * sum3 / n as f64)
}

/// The residual + leverage route to the same quantity.
#[derive(Debug, Clone)]
pub struct GammaDecomposition {
    pub gamma_n: f64,
    pub gamma_tilde: f64,
    pub residual_third_moment: f64,
    pub leverage: LeverageReport,
}

/// Computes `gamma_n` through `e_i^2 + (n-1) H_ii`, together with the
/// two-term bound `gamma_tilde` whose leverage half is known at design time.
///
/// `e_i` is the standardized residual of `r0 Y(1) + r1 Y(0)` projected on the
/// covariates; a population whose outcomes are exactly linear in the
/// covariates has no residual scale to standardize by and is rejected.
pub fn gamma_decomposed(pop: &FinitePopulation) -> Result<GammaDecomposition> {
    let (y1, y0) = both_outcomes(pop)?;
    let (n, k) = (pop.n(), pop.k());
    let (r1, r0) = (pop.r1(), pop.r0());
    let nf = n as f64;

    // Combined projection residuals r0 e(1) + r1 e(0) on the pooled metric.
    let combined: Vec<f64> = y1
        .iter()
        .zip(y0)
        .map(|(&a, &b)| r0 * a + r1 * b)
        .collect();
    let mean_c = combined.iter().sum::<f64>() / nf;
    let mut resid: Vec<f64> = combined.iter().map(|v| v - mean_c).collect();
    if k > 0 {
        let moments = covariate_moments(pop)?;
        let mut s_cx = vec![0.0_f64; k];
        for (i, &r) in resid.iter().enumerate() {
            for (s, (&x, &m)) in s_cx.iter_mut().zip(pop.row(i).iter().zip(moments.mean.iter())) {
                *s += r * (x - m);
            }
        }
        for s in &mut s_cx {
            *s /= nf - 1.0;
        }
        let mut beta = s_cx;
        moments.chol.solve_in_place(&mut beta);
        for (i, r) in resid.iter_mut().enumerate() {
            let fit: f64 = beta
                .iter()
                .zip(pop.row(i).iter().zip(moments.mean.iter()))
                .map(|(b, (&x, &m))| b * (x - m))
                .sum();
            *r -= fit;
        }
    }
    let s2_e = resid.iter().map(|e| e * e).sum::<f64>() / (nf - 1.0);
    if s2_e <= 1e-24 {
        return Err(Error::validation(
            "degenerate residuals: outcomes are exactly linear in the covariates",
        ));
    }
    let scale = s2_e.sqrt();
    let e: Vec<f64> = resid.iter().map(|v| v / scale).collect();

    let leverage = leverage_scores(pop)?;
    let dim_w = ((k + 1) as f64).powf(0.25);
    let sum_identity: f64 = e
        .iter()
        .zip(&leverage.h)
        .map(|(&ei, &hi)| (ei * ei + (nf - 1.0) * hi).powf(1.5))
        .sum();
    let gamma = dim_w / (nf * r1 * r0).sqrt() * sum_identity / nf;

    let third_moment = e.iter().map(|v| v.abs().powi(3)).sum::<f64>() / nf;
    let gamma_tilde =
        dim_w / (r1 * r0 * nf).sqrt() * third_moment + dim_w / (r1 * r0).sqrt() * leverage.sum_h32;

    debug_assert!(
        gamma >= gamma_tilde / (4.0 * 2.0_f64.sqrt()) - 1e-10
            && gamma <= 2.0_f64.sqrt() * gamma_tilde + 1e-10,
        "gamma/gamma_tilde sandwich violated: {gamma} vs {gamma_tilde}"
    );

    Ok(GammaDecomposition {
        gamma_n: gamma,
        gamma_tilde,
        residual_third_moment: third_moment,
        leverage,
    })
}

/// Design-stage half of the bound: `(K+1)^{1/4} (r1 r0)^{-1/2} sum H^{3/2}`,
/// computable before any outcome exists.
pub fn gamma_leverage_only(pop: &FinitePopulation) -> Result<f64> {
    let leverage = leverage_scores(pop)?;
    let dim_w = ((pop.k() + 1) as f64).powf(0.25);
    Ok(dim_w / (pop.r1() * pop.r0()).sqrt() * leverage.sum_h32)
}

/// Computable bound on the convex-set Gaussian approximation error.
pub fn delta_bound(gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    174.0 * gamma + 7.0 * gamma.powf(1.0 / 3.0)
}

/// The regularity product guarding confidence-interval validity: outcome
/// range over residual scale, covariate-dimension load, and the
/// root-log-acceptance term.
pub fn condition6_quantity(pop: &FinitePopulation, k: usize, p: f64) -> Result<f64> {
    let (y1, y0) = both_outcomes(pop)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!(
            "acceptance probability must lie in (0,1], got {p}"
        )));
    }
    let (r1, r0) = (pop.r1(), pop.r0());
    let denom = r0 * residual_variance(pop, 1)? + r1 * residual_variance(pop, 0)?;
    if denom <= 0.0 {
        return Err(Error::validation(
            "zero residual denominator in the regularity quantity",
        ));
    }
    let max_dev_sq = |y: &[f64]| {
        let m = y.iter().sum::<f64>() / y.len() as f64;
        y.iter().map(|v| (v - m) * (v - m)).fold(0.0_f64, f64::max)
    };
    let numer = max_dev_sq(y1).max(max_dev_sq(y0));
    let k_term = (k.max(1)) as f64 / (r1 * r0);
    let mut log_term = 1.0_f64.max(-p.ln());
    if k >= 1 {
        log_term = log_term.max((k as f64).ln());
    }
    Ok(numer / denom * k_term * (log_term / pop.n() as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Design moments and worst-case bias / RMSE
// ---------------------------------------------------------------------------

/// How to obtain the design moments (pi, Omega).
#[derive(Debug, Clone, Copy)]
pub enum DesignMomentMode {
    /// Enumerate all assignments and keep the acceptable ones (guarded).
    Exact,
    /// Simulate `draws` accepted assignments on seeded substreams.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Worst-case standardized bias and root mean squared error of the
/// difference-in-means estimator under a design, over all outcome vectors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WorstCase {
    pub max_bias: f64,
    pub max_rmse: f64,
}

/// Exact design moments of rerandomization with threshold `a`: the mean of
/// `Z` and the dense covariance over the uniformly weighted acceptable set.
pub struct ExactDesignMoments {
    pub pi: Vec<f64>,
    pub omega: DMatrix<f64>,
}

pub fn exact_design_moments(pop: &FinitePopulation, a: f64) -> Result<ExactDesignMoments> {
    let n = pop.n();
    let all = enumerate_assignments(n, pop.n1())?;
    let accept_all = a.is_infinite();
    let cache = if accept_all {
        None
    } else {
        Some(MahalanobisCache::new(pop)?)
    };
    let mut scratch = vec![0.0_f64; 2 * pop.k()];
    let mut count = 0u64;
    let mut sum = vec![0u64; n];
    let mut cross = vec![0u64; n * n];
    for asg in &all {
        if let Some(cache) = &cache {
            let treated = asg.treated_indices();
            if cache.m_of_treated(pop, &treated, &mut scratch) > a {
                continue;
            }
        }
        count += 1;
        let treated = asg.treated_indices();
        for &i in &treated {
            sum[i as usize] += 1;
            for &j in &treated {
                cross[i as usize * n + j as usize] += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::validation(
            "no assignment satisfies the threshold; the design measure is empty",
        ));
    }
    let cf = count as f64;
    let pi: Vec<f64> = sum.iter().map(|&s| s as f64 / cf).collect();
    let mut omega = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            omega[(i, j)] = cross[i * n + j] as f64 / cf - pi[i] * pi[j];
        }
    }
    Ok(ExactDesignMoments { pi, omega })
}

/// Bit-packed accepted assignments plus their mean; the Monte Carlo design
/// moments with the covariance left implicit.
pub struct McDesignMoments {
    pub pi: Vec<f64>,
    draws: usize,
    n: usize,
    words_per_draw: usize,
    data: Vec<u64>,
}

const MC_REP_CHUNK: usize = 64;
const MC_ATTEMPT_GUARD: u64 = 10_000_000;

pub fn mc_design_moments(
    pop: &FinitePopulation,
    a: f64,
    draws: usize,
    seed: u64,
) -> Result<McDesignMoments> {
    if draws < 2 {
        return Err(Error::validation("need at least 2 Monte Carlo draws"));
    }
    let n = pop.n();
    let n1 = pop.n1();
    let words_per_draw = n.div_ceil(64);
    let cache = MahalanobisCache::new(pop)?;
    let n_chunks = draws.div_ceil(MC_REP_CHUNK);
    let chunks: Vec<Result<Vec<u64>>> = par::map_chunks(n_chunks, |c| {
        let budget = MC_REP_CHUNK.min(draws - c * MC_REP_CHUNK);
        let mut rng = stream_rng(seed, DOMAIN_DESIGN_MC, c as u64);
        let mut indices: Vec<u32> = (0..n as u32).collect();
        let mut scratch = vec![0.0_f64; 2 * pop.k()];
        let mut words = vec![0u64; budget * words_per_draw];
        for rep in 0..budget {
            let mut attempts = 0u64;
            loop {
                attempts += 1;
                if attempts > MC_ATTEMPT_GUARD {
                    return Err(Error::MaxDrawsExceeded {
                        draws: MC_ATTEMPT_GUARD,
                        min_m: f64::NAN,
                    });
                }
                // Partial Fisher-Yates; prefix is a uniform treated set.
                for i in 0..n1 {
                    let j = i + rng.random_range(0..(n - i) as u32) as usize;
                    indices.swap(i, j);
                }
                if cache.m_of_treated(pop, &indices[..n1], &mut scratch) <= a {
                    break;
                }
            }
            let base = rep * words_per_draw;
            for &i in &indices[..n1] {
                words[base + (i as usize >> 6)] |= 1u64 << (i as usize & 63);
            }
        }
        Ok(words)
    });
    let mut data = Vec::with_capacity(draws * words_per_draw);
    for chunk in chunks {
        data.extend(chunk?);
    }
    let mut counts = vec![0u64; n];
    for r in 0..draws {
        let base = r * words_per_draw;
        for (w, &word) in data[base..base + words_per_draw].iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let i = (w << 6) + bits.trailing_zeros() as usize;
                counts[i] += 1;
                bits &= bits - 1;
            }
        }
    }
    let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    Ok(McDesignMoments {
        pi,
        draws,
        n,
        words_per_draw,
        data,
    })
}

impl McDesignMoments {
    /// Applies `Omega_hat v` (divisor R-1) matrix-free over the stored draws.
    fn apply_omega(&self, v: &[f64], out: &mut [f64]) {
        let pi_dot_v: f64 = self.pi.iter().zip(v).map(|(p, x)| p * x).sum();
        let chunk_draws = 4096;
        let n_chunks = self.draws.div_ceil(chunk_draws);
        let partials: Vec<(Vec<f64>, f64)> = par::map_chunks(n_chunks, |c| {
            let start = c * chunk_draws;
            let end = (start + chunk_draws).min(self.draws);
            let mut acc = vec![0.0_f64; self.n];
            let mut c_sum = 0.0;
            for r in start..end {
                let base = r * self.words_per_draw;
                let words = &self.data[base..base + self.words_per_draw];
                let mut s = 0.0;
                for (w, &word) in words.iter().enumerate() {
                    let mut bits = word;
                    while bits != 0 {
                        let i = (w << 6) + bits.trailing_zeros() as usize;
                        s += v[i];
                        bits &= bits - 1;
                    }
                }
                let coef = s - pi_dot_v;
                c_sum += coef;
                for (w, &word) in words.iter().enumerate() {
                    let mut bits = word;
                    while bits != 0 {
                        let i = (w << 6) + bits.trailing_zeros() as usize;
                        acc[i] += coef;
                        bits &= bits - 1;
                    }
                }
            }
            (acc, c_sum)
        });
        out.fill(0.0);
        let mut c_total = 0.0;
        for (acc, c_sum) in partials {
            for (o, a) in out.iter_mut().zip(acc) {
                *o += a;
            }
            c_total += c_sum;
        }
        let scale = 1.0 / (self.draws - 1) as f64;
        for (o, &p) in out.iter_mut().zip(&self.pi) {
            *o = (*o - c_total * p) * scale;
        }
    }
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration:
/// all-ones start plus one seeded random restart (the ones vector is exactly
/// orthogonal to the range of a fixed-group-size design covariance), relative
/// eigenvalue change below 1e-13 or 10^4 iterations.
fn power_iteration_max_eig<F>(n: usize, apply: F) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    let run = |start: Vec<f64>| -> f64 {
        let mut v = start;
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let mut w = vec![0.0_f64; n];
        let mut lambda_prev = f64::MAX;
        for _ in 0..10_000 {
            apply(&v, &mut w);
            let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let w_norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if w_norm <= 1e-300 {
                return 0.0; // start vector sits in the null space
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / w_norm;
            }
            if (lambda - lambda_prev).abs() <= 1e-13 * lambda.abs().max(1e-300) {
                return lambda;
            }
            lambda_prev = lambda;
        }
        lambda_prev
    };
    let ones = run(vec![1.0; n]);
    let mut rng = stream_rng(0, DOMAIN_POWER_RESTART, n as u64);
    let random_start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let restarted = run(random_start);
    ones.max(restarted)
}

/// Worst-case standardized bias and RMSE of a design with threshold `a`:
/// `sqrt((n-1)/(n r1 r0)) ||pi - r1 1||` and the same factor times the root
/// of the largest eigenvalue of `Omega + (pi - r1 1)(pi - r1 1)^T`.
pub fn max_bias_rmse(pop: &FinitePopulation, a: f64, mode: DesignMomentMode) -> Result<WorstCase> {
    let n = pop.n();
    let r1 = pop.r1();
    let factor = ((n as f64 - 1.0) / (n as f64 * r1 * pop.r0())).sqrt();
    let (pi, lambda_max) = match mode {
        DesignMomentMode::Exact => {
            let moments = exact_design_moments(pop, a)?;
            let d: Vec<f64> = moments.pi.iter().map(|&p| p - r1).collect();
            let apply = |v: &[f64], out: &mut [f64]| {
                let d_dot_v: f64 = d.iter().zip(v).map(|(a, b)| a * b).sum();
                for (i, o) in out.iter_mut().enumerate() {
                    let acc: f64 = v
                        .iter()
                        .enumerate()
                        .map(|(j, &vj)| moments.omega[(i, j)] * vj)
                        .sum();
                    *o = acc + d_dot_v * d[i];
                }
            };
            (moments.pi, power_iteration_max_eig(n, apply))
        }
        DesignMomentMode::MonteCarlo { draws, seed } => {
            if draws < 1000 {
                return Err(Error::validation(
                    "Monte Carlo design moments need at least 1000 draws",
                ));
            }
            let moments = mc_design_moments(pop, a, draws, seed)?;
            let d: Vec<f64> = moments.pi.iter().map(|&p| p - r1).collect();
            let apply = |v: &[f64], out: &mut [f64]| {
                moments.apply_omega(v, out);
                let d_dot_v: f64 = d.iter().zip(v).map(|(a, b)| a * b).sum();
                for (o, &di) in out.iter_mut().zip(&d) {
                    *o += d_dot_v * di;
                }
            };
            (moments.pi.clone(), power_iteration_max_eig(n, apply))
        }
    };
    let dist: f64 = pi
        .iter()
        .map(|&p| (p - r1) * (p - r1))
        .sum::<f64>()
        .sqrt();
    Ok(WorstCase {
        max_bias: factor * dist,
        max_rmse: factor * lambda_max.max(0.0).sqrt(),
    })
}

/// Exact bias of the difference-in-means under design moments `pi`:
/// `(pi - r1 1)^T y_tilde / (n r1 r0)`.
pub fn formula_bias(pop: &FinitePopulation, pi: &[f64]) -> Result<f64> {
    let y_tilde = centered_weighted_outcomes(pop)?;
    let r1 = pop.r1();
    let dot: f64 = pi
        .iter()
        .zip(&y_tilde)
        .map(|(&p, &y)| (p - r1) * y)
        .sum();
    Ok(dot / (pop.n() as f64 * r1 * pop.r0()))
}

/// Exact mean squared error under design moments `(pi, Omega)`:
/// `y_tilde^T (Omega + dd^T) y_tilde / (n r1 r0)^2`.
pub fn formula_mse(pop: &FinitePopulation, moments: &ExactDesignMoments) -> Result<f64> {
    let y_tilde = centered_weighted_outcomes(pop)?;
    let n = pop.n();
    let r1 = pop.r1();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += y_tilde[i] * moments.omega[(i, j)] * y_tilde[j];
        }
    }
    let dot: f64 = moments
        .pi
        .iter()
        .zip(&y_tilde)
        .map(|(&p, &y)| (p - r1) * y)
        .sum();
    quad += dot * dot;
    let scale = n as f64 * r1 * pop.r0();
    Ok(quad / (scale * scale))
}

/// The centered weighted-outcome vector `y_i = r0 Y_i(1) + r1 Y_i(0) - mean`.
pub fn centered_weighted_outcomes(pop: &FinitePopulation) -> Result<Vec<f64>> {
    let (y1, y0) = both_outcomes(pop)?;
    let (r1, r0) = (pop.r1(), pop.r0());
    let y: Vec<f64> = y1.iter().zip(y0).map(|(&a, &b)| r0 * a + r1 * b).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    Ok(y.iter().map(|v| v - mean).collect())
}

/// Full diagnosis of a population under an intended design `(k, p)`.
/// Outcome-dependent entries appear only when both potential outcomes exist;
/// worst-case bias/RMSE appear when a design-moment mode is supplied.
pub fn diagnose(
    pop: &FinitePopulation,
    p: f64,
    design_mode: Option<DesignMomentMode>,
) -> Result<DiagnosticsReport> {
    let has_outcomes = pop.y1().is_some() && pop.y0().is_some();
    let (gamma, gamma_tilde, third, leverage) = if has_outcomes {
        let dec = gamma_decomposed(pop)?;
        (
            Some(dec.gamma_n),
            Some(dec.gamma_tilde),
            Some(dec.residual_third_moment),
            dec.leverage,
        )
    } else {
        (None, None, None, leverage_scores(pop)?)
    };
    let condition6 = if has_outcomes {
        Some(condition6_quantity(pop, pop.k(), p)?)
    } else {
        None
    };
    let worst = match design_mode {
        Some(mode) => {
            let a = if pop.k() == 0 {
                f64::INFINITY
            } else {
                crate::specialfn::chi2_quantile(p, pop.k() as u32)?
            };
            Some(max_bias_rmse(pop, a, mode)?)
        }
        None => None,
    };
    Ok(DiagnosticsReport {
        gamma_n: gamma,
        gamma_tilde,
        gamma_lower_bound: gamma_lower_bound(pop.n(), pop.n1(), pop.k()),
        delta_bound: gamma.map(delta_bound),
        residual_third_moment: third,
        leverage,
        condition6,
        max_bias: worst.map(|w| w.max_bias),
        max_rmse: worst.map(|w| w.max_rmse),
    })
}
