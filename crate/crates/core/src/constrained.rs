//! The constrained Gaussian law `L_{K,a} ~ D_1 | D^T D <= a` for a standard
//! K-dimensional Gaussian `D`, and the convolution
//! `sqrt(1-R^2) eps + sqrt(R^2) L_{K,a}` that governs the difference-in-means
//! estimator under rerandomization.
//!
//! `v_{K,a} = Var(L_{K,a}) = P(chi^2_{K+2} <= a) / P(chi^2_K <= a)` is exact;
//! convolution quantiles are seeded antithetic Monte Carlo (the density has
//! no closed form), with exact shortcut paths wherever the law degenerates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::par;
use crate::rng::{stream_rng, DOMAIN_NU};
use crate::specialfn::{
    chi2_cdf, chi2_quantile_inner, gamma_pq, ln_gamma_p, normal_quantile, normal_quantile_inner,
};
use crate::{Error, Result};

/// Variance of the constrained Gaussian: `P(chi^2_{K+2} <= a)/P(chi^2_K <= a)`.
///
/// Conventions: `a = 0` gives 0 (the degenerate law `L == 0`), `a = inf`
/// gives 1 (unconstrained standard Gaussian), and `k = 0` gives 1 (no
/// covariates: rerandomization degenerates to complete randomization). When
/// the CDFs underflow f64 the ratio is taken in log space instead.
pub fn v_ka(k: u32, a: f64) -> Result<f64> {
    if a.is_nan() || a < 0.0 {
        return Err(Error::validation(format!("threshold must be >= 0, got {a}")));
    }
    if k == 0 || a.is_infinite() {
        return Ok(1.0);
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let s = 0.5 * k as f64;
    let x = 0.5 * a;
    let denom = gamma_pq(s, x).0;
    if denom > 1e-290 {
        Ok((gamma_pq(s + 1.0, x).0 / denom).min(1.0))
    } else {
        // Underflow regime: a is far in the lower tail, so the series branch
        // of the log-CDF applies to both numerator and denominator.
        Ok((ln_gamma_p(s + 1.0, x) - ln_gamma_p(s, x)).exp().min(1.0))
    }
}

/// The law `L_{K,a}` with its cached acceptance probability and variance.
#[derive(Debug, Clone)]
pub struct ConstrainedGaussianLaw {
    k: u32,
    a: f64,
    p: f64,
    v: f64,
}

impl ConstrainedGaussianLaw {
    /// Requires `k >= 1` and `a >= 0` (possibly infinite).
    pub fn new(k: u32, a: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::validation("constrained Gaussian law needs k >= 1"));
        }
        if a.is_nan() || a < 0.0 {
            return Err(Error::validation(format!("threshold must be >= 0, got {a}")));
        }
        let p = if a.is_infinite() { 1.0 } else { chi2_cdf(a, k)? };
        let v = v_ka(k, a)?;
        Ok(Self { k, a, p, v })
    }

    /// Law pinned by the approximate acceptance probability `p` instead of
    /// the threshold: `a` is the `p`th chi-square quantile.
    pub fn from_acceptance(k: u32, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::validation(format!(
                "acceptance probability must lie in (0,1], got {p}"
            )));
        }
        if p == 1.0 {
            Self::new(k, f64::INFINITY)
        } else {
            let a = crate::specialfn::chi2_quantile(p, k)?;
            Self::new(k, a)
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    /// Cached `P(chi^2_k <= a)`.
    pub fn p(&self) -> f64 {
        self.p
    }
    /// Cached `v_{K,a}`.
    pub fn v(&self) -> f64 {
        self.v
    }
}

/// Monte Carlo configuration for convolution quantiles.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    /// Total draws; antithetic runs round this up to an even count.
    pub samples: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 2_000_000,
            seed: 0,
            antithetic: true,
        }
    }
}

impl McConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 10_000 {
            return Err(Error::validation(format!(
                "Monte Carlo needs at least 10,000 samples, got {}",
                self.samples
            )));
        }
        Ok(())
    }
}

/// One exact draw of `L_{K,a}` via the decomposition `L = s * sqrt(S * B)`:
/// `S` is chi-square(k) truncated to `[0, a]` by inverse CDF,
/// `B ~ Beta(1/2, (k-1)/2)` is the squared first coordinate of a uniform
/// direction (`B == 1` when k = 1), and `s` is a fair sign.
pub fn sample_l(law: &ConstrainedGaussianLaw, rng: &mut ChaCha8Rng) -> Result<f64> {
    if law.a == 0.0 {
        return Err(Error::validation(
            "a = 0 is the degenerate law L == 0; use the constant directly",
        ));
    }
    if law.p <= 0.0 {
        return Err(Error::SingularCovariance(format!(
            "acceptance probability underflows for k={}, a={}",
            law.k, law.a
        )));
    }
    Ok(sample_l_unchecked(law, rng))
}

fn sample_l_unchecked(law: &ConstrainedGaussianLaw, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let s_val = chi2_quantile_inner((u * law.p).max(f64::MIN_POSITIVE), law.k);
    let b = if law.k == 1 {
        1.0
    } else {
        rand_distr::Beta::new(0.5, 0.5 * (law.k - 1) as f64)
            .expect("valid Beta parameters")
            .sample(rng)
    };
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    sign * (s_val * b).sqrt()
}

const PAIR_CHUNK: usize = 1 << 16;

/// Cached paired draws of `(eps, L)` for one law, supporting repeated
/// quantile queries with different `R^2` values (replication loops price one
/// generation pass, then each query is a selection).
pub struct NuSampler {
    law: Option<ConstrainedGaussianLaw>,
    pairs: Vec<(f64, f64)>,
    antithetic: bool,
}

impl NuSampler {
    /// Draws the paired sample. `k = 0` or an infinite threshold produce a
    /// sampler that answers every query from the exact Gaussian path.
    pub fn new(k: u32, a: f64, cfg: &McConfig) -> Result<Self> {
        cfg.validate()?;
        if k == 0 || a.is_infinite() || a == 0.0 {
            let law = if k == 0 { None } else { Some(ConstrainedGaussianLaw::new(k, a)?) };
            return Ok(Self {
                law,
                pairs: Vec::new(),
                antithetic: cfg.antithetic,
            });
        }
        let law = ConstrainedGaussianLaw::new(k, a)?;
        if law.p <= 0.0 {
            return Err(Error::validation(format!(
                "acceptance probability underflows for k={k}, a={a}"
            )));
        }
        let n_pairs = if cfg.antithetic {
            cfg.samples.div_ceil(2)
        } else {
            cfg.samples
        };
        let mut pairs = vec![(0.0_f64, 0.0_f64); n_pairs];
        let seed = cfg.seed;
        let law_ref = &law;
        par::fill_chunks(&mut pairs, PAIR_CHUNK, |chunk, piece| {
            let mut rng = stream_rng(seed, DOMAIN_NU, chunk as u64);
            for slot in piece.iter_mut() {
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                let l = sample_l_unchecked(law_ref, &mut rng);
                *slot = (eps, l);
            }
        });
        Ok(Self {
            law: Some(law),
            pairs,
            antithetic: cfg.antithetic,
        })
    }

    pub fn law(&self) -> Option<&ConstrainedGaussianLaw> {
        self.law.as_ref()
    }

    /// Number of values entering each quantile query.
    pub fn effective_samples(&self) -> usize {
        if self.antithetic {
            2 * self.pairs.len()
        } else {
            self.pairs.len()
        }
    }

    /// Empirical `alpha` quantile of `sqrt(1-r2) eps + sqrt(r2) L`.
    ///
    /// Exact shortcuts: `r2 = 0` or an unconstrained law give the Gaussian
    /// quantile; `a = 0` gives `sqrt(1-r2)` times the Gaussian quantile.
    /// Antithetic pairing makes the sample exactly symmetric, so the median
    /// is exactly zero.
    pub fn quantile(&self, alpha: f64, r2: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::validation(format!(
                "quantile level must lie in (0,1), got {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&r2) {
            return Err(Error::validation(format!("r2 must lie in [0,1], got {r2}")));
        }
        let unconstrained = match &self.law {
            None => true,
            Some(law) => law.a.is_infinite(),
        };
        if r2 == 0.0 || unconstrained {
            return normal_quantile(alpha);
        }
        let law = self.law.as_ref().expect("constrained law present");
        if law.a == 0.0 {
            return Ok((1.0 - r2).sqrt() * normal_quantile_inner(alpha));
        }
        let w_eps = (1.0 - r2).sqrt();
        let w_l = r2.sqrt();
        let half = self.pairs.len();
        let total = self.effective_samples();
        let mut buf = Vec::with_capacity(total);
        buf.extend(self.pairs.iter().map(|&(e, l)| w_eps * e + w_l * l));
        if self.antithetic {
            for i in 0..half {
                buf.push(-buf[i]);
            }
        }
        Ok(empirical_quantile(&mut buf, alpha))
    }
}

/// Order statistic at the 1-based index ceil(alpha * n); when alpha * n lands
/// exactly on an integer the two adjacent order statistics are averaged
/// (deterministic tie handling, and what pins the median of a symmetric
/// sample to exactly zero).
pub(crate) fn empirical_quantile(buf: &mut [f64], alpha: f64) -> f64 {
    let n = buf.len();
    debug_assert!(n > 0);
    let pos = alpha * n as f64;
    let idx = (pos.ceil() as usize).clamp(1, n);
    let exact_integer = pos == pos.ceil() && idx < n;
    let (below, at, above) = {
        let (lo, at, hi) = buf.select_nth_unstable_by(idx - 1, f64::total_cmp);
        (lo.len(), *at, hi)
    };
    let _ = below;
    if exact_integer {
        let next = above
            .iter()
            .copied()
            .min_by(f64::total_cmp)
            .unwrap_or(at);
        0.5 * (at + next)
    } else {
        at
    }
}

/// `alpha` quantile of `sqrt(1-r2) eps + sqrt(r2) L_{k,a}` over a fresh
/// seeded sample. Replication loops should build one [`NuSampler`] and query
/// it instead.
pub fn nu_quantile(alpha: f64, k: u32, a: f64, r2: f64, cfg: &McConfig) -> Result<f64> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&r2) {
        return Err(Error::validation(format!("r2 must lie in [0,1], got {r2}")));
    }
    // Exact paths never pay for sampling.
    if r2 == 0.0 || k == 0 || a.is_infinite() {
        return normal_quantile(alpha);
    }
    if a == 0.0 {
        return Ok((1.0 - r2).sqrt() * normal_quantile(alpha)?);
    }
    NuSampler::new(k, a, cfg)?.quantile(alpha, r2)
}

/// Percentage reductions, relative to complete randomization, in asymptotic
/// variance and in the length of the symmetric `1-alpha` quantile range:
/// `((1 - v_{K,a}) r2, 1 - nu_{1-alpha/2}(r2)/z_{1-alpha/2})`.
pub fn percentage_reductions(
    k: u32,
    a: f64,
    r2: f64,
    alpha: f64,
    cfg: &McConfig,
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&r2) {
        return Err(Error::validation(format!("r2 must lie in [0,1], got {r2}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let var_reduction = (1.0 - v_ka(k, a)?) * r2;
    let qr_reduction = if r2 == 0.0 || k == 0 || a.is_infinite() {
        0.0
    } else if a == 0.0 {
        1.0 - (1.0 - r2).sqrt()
    } else {
        let level = 1.0 - alpha / 2.0;
        1.0 - nu_quantile(level, k, a, r2, cfg)? / normal_quantile(level)?
    };
    Ok((var_reduction, qr_reduction))
}
