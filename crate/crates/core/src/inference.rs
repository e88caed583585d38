//! Post-experiment analysis: difference-in-means, conservative variance and
//! R-squared estimation with HC0–HC3 residual rescaling, and both
//! confidence-interval constructions.
//!
//! The variance estimator replaces the finite-population variances in the
//! complete-randomization expression with their within-arm sample analogues:
//!
//! ```text
//! V̂   = s²₁/n₁ + s²₀/n₀ − s²_{τ|X}/n
//! R̂²  = 1 − (s²_{1∖X}/n₁ + s²_{0∖X}/n₀) / V̂
//! ```
//!
//! where `s²_{z∖X} = s²_z − s_{z,X}(S²_X)⁻¹s_{X,z}` uses the covariate
//! covariance of the full population. HC1–HC3 inflate `s²_{z∖X}` by the
//! ratio in which rescaling the within-arm regression residuals by κ_i
//! inflates their sample variance, so HC0 reproduces the raw algebra exactly
//! and the κ ordering carries over to interval widths.

use nalgebra::DVector;
use serde::Serialize;

use crate::constrained::{McConfig, NuSampler};
use crate::design::Assignment;
use crate::linalg::CholFactor;
use crate::population::{covariate_moments, FinitePopulation};
use crate::specialfn::normal_quantile;
use crate::{Error, Result};

/// Residual rescaling scheme for the variance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HcMode {
    #[serde(rename = "HC0")]
    Hc0,
    #[serde(rename = "HC1")]
    Hc1,
    #[serde(rename = "HC2")]
    Hc2,
    #[serde(rename = "HC3")]
    Hc3,
}

impl HcMode {
    pub const ALL: [HcMode; 4] = [HcMode::Hc0, HcMode::Hc1, HcMode::Hc2, HcMode::Hc3];

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(HcMode::Hc0),
            1 => Ok(HcMode::Hc1),
            2 => Ok(HcMode::Hc2),
            3 => Ok(HcMode::Hc3),
            _ => Err(Error::validation(format!("hc mode must be 0..=3, got {i}"))),
        }
    }
}

impl std::fmt::Display for HcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            HcMode::Hc0 => "HC0",
            HcMode::Hc1 => "HC1",
            HcMode::Hc2 => "HC2",
            HcMode::Hc3 => "HC3",
        };
        f.write_str(s)
    }
}

/// Which confidence-interval construction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// Quantiles of the Gaussian + constrained-Gaussian convolution.
    Constrained,
    /// Gaussian quantiles on the residual variance (optimal-regime interval).
    Wald,
}

/// Observed outcomes under one realized assignment, tied to the population
/// whose covariates generated the design.
#[derive(Debug, Clone)]
pub struct ObservedData {
    pop: FinitePopulation,
    assignment: Assignment,
    y: Vec<f64>,
}

impl ObservedData {
    pub fn new(pop: FinitePopulation, assignment: Assignment, y: Vec<f64>) -> Result<Self> {
        if assignment.n() != pop.n() || y.len() != pop.n() {
            return Err(Error::validation(
                "outcome/assignment lengths do not match the population",
            ));
        }
        if assignment.n1() != pop.n1() {
            return Err(Error::validation(format!(
                "assignment has {} treated units, population plans {}",
                assignment.n1(),
                pop.n1()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("outcomes contain non-finite values"));
        }
        Ok(Self {
            pop,
            assignment,
            y,
        })
    }

    pub fn pop(&self) -> &FinitePopulation {
        &self.pop
    }
    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// Reveals `Y_i = Z_i Y_i(1) + (1-Z_i) Y_i(0)` for a population that carries
/// both potential outcomes.
pub fn observe(pop: &FinitePopulation, assignment: &Assignment) -> Result<ObservedData> {
    let (y1, y0) = match (pop.y1(), pop.y0()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::validation(
                "observe requires both potential outcomes",
            ))
        }
    };
    let y: Vec<f64> = assignment
        .z()
        .iter()
        .zip(y1.iter().zip(y0))
        .map(|(&z, (&a, &b))| if z == 1 { a } else { b })
        .collect();
    ObservedData::new(pop.clone(), assignment.clone(), y)
}

/// The difference-in-means estimator `Ȳ₁ − Ȳ₀`.
pub fn diff_in_means(data: &ObservedData) -> Result<f64> {
    let mut sum1 = 0.0;
    let mut sum0 = 0.0;
    for (&z, &y) in data.assignment.z().iter().zip(&data.y) {
        if z == 1 {
            sum1 += y;
        } else {
            sum0 += y;
        }
    }
    let n1 = data.assignment.n1();
    let n0 = data.assignment.n0();
    if n1 == 0 || n0 == 0 {
        return Err(Error::validation("both arms must be nonempty"));
    }
    Ok(sum1 / n1 as f64 - sum0 / n0 as f64)
}

/// Output of [`estimate_variance_r2`].
#[derive(Debug, Clone, Copy)]
pub struct VarianceEstimate {
    pub v_hat: f64,
    /// Clamped to [0, 1 - 1e-12].
    pub r2_hat: f64,
    /// HC-adjusted residual variances (treated, control).
    pub s2_resid: [f64; 2],
}

const R2_CEIL: f64 = 1.0 - 1e-12;

struct ArmStats {
    n_z: usize,
    s2: f64,
    s_zx: Vec<f64>,
    /// HC-inflated residual variance substituted into R̂².
    s2_resid: f64,
}

fn arm_stats(data: &ObservedData, arm: u8, pooled: &CholFactor, hc: HcMode) -> Result<ArmStats> {
    let pop = &data.pop;
    let k = pop.k();
    let members: Vec<usize> = data
        .assignment
        .z()
        .iter()
        .enumerate()
        .filter(|(_, &z)| z == arm)
        .map(|(i, _)| i)
        .collect();
    let n_z = members.len();
    if n_z < 2 {
        return Err(Error::validation(format!(
            "arm {arm} has {n_z} units; variance estimation needs at least 2"
        )));
    }
    if hc != HcMode::Hc0 && n_z < k + 2 {
        return Err(Error::validation(format!(
            "HC1-HC3 need n_z >= K + 2 (arm {arm}: n_z = {n_z}, K = {k})"
        )));
    }
    let denom = (n_z - 1) as f64;

    let y_bar = members.iter().map(|&i| data.y[i]).sum::<f64>() / n_z as f64;
    let mut x_bar = vec![0.0_f64; k];
    for &i in &members {
        for (m, &x) in x_bar.iter_mut().zip(pop.row(i)) {
            *m += x;
        }
    }
    for m in &mut x_bar {
        *m /= n_z as f64;
    }

    let mut s2 = 0.0;
    let mut s_zx = vec![0.0_f64; k];
    let mut gram = nalgebra::DMatrix::zeros(k, k);
    let mut centered = vec![0.0_f64; k];
    for &i in &members {
        let dy = data.y[i] - y_bar;
        s2 += dy * dy;
        for (c, (&x, &m)) in centered.iter_mut().zip(pop.row(i).iter().zip(&x_bar)) {
            *c = x - m;
        }
        for a in 0..k {
            s_zx[a] += dy * centered[a];
            for b in a..k {
                gram[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    s2 /= denom;
    for v in &mut s_zx {
        *v /= denom;
    }
    for a in 0..k {
        for b in a..k {
            gram[(a, b)] /= denom;
            gram[(b, a)] = gram[(a, b)];
        }
    }

    // Raw residual term of the R̂² formula, on the pooled metric.
    let q_z = if k > 0 { pooled.quad_form_inv(&s_zx) } else { 0.0 };
    let s2_resid_raw = s2 - q_z;

    // Within-arm regression on intercept + covariates: residuals and
    // leverages drive the HC inflation and detect the perfect-fit case.
    let within_chol = if k > 0 {
        Some(CholFactor::new(&gram).map_err(|_| {
            Error::SingularCovariance(format!(
                "within-arm covariate covariance is singular in arm {arm}"
            ))
        })?)
    } else {
        None
    };
    let beta: Vec<f64> = match &within_chol {
        Some(w) => {
            let mut b = s_zx.clone();
            w.solve_in_place(&mut b);
            b
        }
        None => Vec::new(),
    };

    let mut raw_rss = 0.0;
    let mut rescaled_rss = 0.0;
    let mut scratch = vec![0.0_f64; k];
    for &i in &members {
        for (c, (&x, &m)) in centered.iter_mut().zip(pop.row(i).iter().zip(&x_bar)) {
            *c = x - m;
        }
        let fit: f64 = beta.iter().zip(&centered).map(|(b, c)| b * c).sum();
        let e = data.y[i] - y_bar - fit;
        raw_rss += e * e;
        let kappa = match hc {
            HcMode::Hc0 => 1.0,
            HcMode::Hc1 => (denom / (n_z - k - 1) as f64).sqrt(),
            HcMode::Hc2 | HcMode::Hc3 => {
                let h = 1.0 / n_z as f64
                    + match &within_chol {
                        Some(w) => w.quad_form_inv_with(&centered, &mut scratch) / denom,
                        None => 0.0,
                    };
                if h >= 1.0 - 1e-12 {
                    return Err(Error::validation(format!(
                        "unit {i} has leverage 1 in arm {arm}; HC2/HC3 undefined"
                    )));
                }
                if hc == HcMode::Hc2 {
                    1.0 / (1.0 - h).sqrt()
                } else {
                    1.0 / (1.0 - h)
                }
            }
        };
        let re = kappa * e;
        rescaled_rss += re * re;
    }

    // Perfect within-arm fit: residual variance is exactly zero.
    let s2_resid = if raw_rss <= 1e-24 * s2.max(1.0) * denom {
        0.0
    } else if hc == HcMode::Hc0 {
        s2_resid_raw
    } else {
        s2_resid_raw * (rescaled_rss / raw_rss)
    };

    Ok(ArmStats {
        n_z,
        s2,
        s_zx,
        s2_resid,
    })
}

/// Sample-analogue variance and R-squared with the chosen HC rescaling.
pub fn estimate_variance_r2(data: &ObservedData, hc: HcMode) -> Result<VarianceEstimate> {
    let pop = &data.pop;
    let k = pop.k();
    let pooled = if k > 0 {
        covariate_moments(pop)?.chol
    } else {
        CholFactor::new(&nalgebra::DMatrix::zeros(0, 0))?
    };
    let arm1 = arm_stats(data, 1, &pooled, hc)?;
    let arm0 = arm_stats(data, 0, &pooled, hc)?;

    let s2_tau_x = if k > 0 {
        let d: Vec<f64> = arm1
            .s_zx
            .iter()
            .zip(&arm0.s_zx)
            .map(|(a, b)| a - b)
            .collect();
        pooled.quad_form_inv(&d)
    } else {
        0.0
    };
    let n = pop.n() as f64;
    let v_hat = arm1.s2 / arm1.n_z as f64 + arm0.s2 / arm0.n_z as f64 - s2_tau_x / n;
    if v_hat.is_nan() || v_hat <= 0.0 {
        return Err(Error::validation(format!(
            "degenerate variance estimate V = {v_hat}; outcomes carry no usable variation"
        )));
    }
    let resid_term = arm1.s2_resid / arm1.n_z as f64 + arm0.s2_resid / arm0.n_z as f64;
    let r2_hat = (1.0 - resid_term / v_hat).clamp(0.0, R2_CEIL);
    Ok(VarianceEstimate {
        v_hat,
        r2_hat,
        s2_resid: [arm1.s2_resid, arm0.s2_resid],
    })
}

/// A point estimate with its confidence interval.
#[derive(Debug, Clone, Serialize)]
pub struct InferenceResult {
    pub tau_hat: f64,
    pub v_hat: f64,
    pub r2_hat: f64,
    /// `[lower, upper]`, symmetric about `tau_hat`.
    pub ci: [f64; 2],
    pub method: CiMethod,
    pub hc: HcMode,
    pub alpha: f64,
    /// Standardized half-width: half-width divided by sqrt(v_hat). For the
    /// constrained method this is the convolution quantile; for Wald it is
    /// `sqrt(1 - r2) z_{1-alpha/2}`.
    pub nu_used: f64,
    pub k: u32,
    /// Design threshold; infinite thresholds serialize as null.
    pub a: f64,
    pub seed: u64,
}

impl InferenceResult {
    pub fn ci_lower(&self) -> f64 {
        self.ci[0]
    }
    pub fn ci_upper(&self) -> f64 {
        self.ci[1]
    }
    pub fn half_width(&self) -> f64 {
        self.ci[1] - self.tau_hat
    }
}

/// Confidence interval for the average treatment effect under a design with
/// `k` covariates and threshold `a`, at level `1 - alpha`.
pub fn confidence_interval(
    data: &ObservedData,
    k: u32,
    a: f64,
    alpha: f64,
    method: CiMethod,
    hc: HcMode,
    cfg: &McConfig,
) -> Result<InferenceResult> {
    let sampler = match method {
        CiMethod::Constrained => Some(NuSampler::new(k, a, cfg)?),
        CiMethod::Wald => None,
    };
    confidence_interval_impl(data, k, a, alpha, method, hc, sampler.as_ref(), cfg.seed)
}

/// Same as [`confidence_interval`] but reusing a prebuilt sampler; the cheap
/// path for replication loops where only `R̂²` changes between calls.
pub fn confidence_interval_with_sampler(
    data: &ObservedData,
    sampler: &NuSampler,
    alpha: f64,
    method: CiMethod,
    hc: HcMode,
    seed: u64,
) -> Result<InferenceResult> {
    let (k, a) = match sampler.law() {
        Some(law) => (law.k(), law.a()),
        None => (0, f64::INFINITY),
    };
    confidence_interval_impl(data, k, a, alpha, method, hc, Some(sampler), seed)
}

#[allow(clippy::too_many_arguments)]
fn confidence_interval_impl(
    data: &ObservedData,
    k: u32,
    a: f64,
    alpha: f64,
    method: CiMethod,
    hc: HcMode,
    sampler: Option<&NuSampler>,
    seed: u64,
) -> Result<InferenceResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let tau_hat = diff_in_means(data)?;
    let est = estimate_variance_r2(data, hc)?;
    let level = 1.0 - alpha / 2.0;
    let nu_used = match method {
        CiMethod::Constrained => sampler
            .expect("constrained method requires a sampler")
            .quantile(level, est.r2_hat)?,
        CiMethod::Wald => (1.0 - est.r2_hat).sqrt() * normal_quantile(level)?,
    };
    let half = est.v_hat.sqrt() * nu_used;
    Ok(InferenceResult {
        tau_hat,
        v_hat: est.v_hat,
        r2_hat: est.r2_hat,
        ci: [tau_hat - half, tau_hat + half],
        method,
        hc,
        alpha,
        nu_used,
        k,
        a,
        seed,
    })
}

/// Recomputes (V̂, R̂²) for HC0 from scratch with explicit dense inverses.
/// Cross-check oracle for tests; not used by the estimation path.
#[doc(hidden)]
pub fn textbook_variance_oracle(data: &ObservedData) -> Result<(f64, f64)> {
    let pop = data.pop();
    let (n, k) = (pop.n(), pop.k());
    let x = pop.covariate_matrix();
    let pooled_mean = x.row_mean();
    let mut centered = x.clone();
    for i in 0..n {
        for j in 0..k {
            centered[(i, j)] -= pooled_mean[j];
        }
    }
    let s_x = centered.transpose() * &centered / (n - 1) as f64;
    let s_x_inv = s_x.try_inverse().ok_or_else(|| {
        Error::SingularCovariance("oracle: covariate covariance not invertible".into())
    })?;

    let arm = |z: u8| -> (f64, DVector<f64>, usize) {
        let members: Vec<usize> = data
            .assignment()
            .z()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == z)
            .map(|(i, _)| i)
            .collect();
        let n_z = members.len();
        let y_bar = members.iter().map(|&i| data.y()[i]).sum::<f64>() / n_z as f64;
        let mut x_bar = DVector::zeros(k);
        for &i in &members {
            for j in 0..k {
                x_bar[j] += x[(i, j)];
            }
        }
        x_bar /= n_z as f64;
        let mut s2 = 0.0;
        let mut s_zx = DVector::zeros(k);
        for &i in &members {
            let dy = data.y()[i] - y_bar;
            s2 += dy * dy;
            for j in 0..k {
                s_zx[j] += dy * (x[(i, j)] - x_bar[j]);
            }
        }
        (s2 / (n_z - 1) as f64, s_zx / (n_z - 1) as f64, n_z)
    };
    let (s2_1, s1x, n1) = arm(1);
    let (s2_0, s0x, n0) = arm(0);
    let d = &s1x - &s0x;
    let s2_tau_x = (d.transpose() * &s_x_inv * &d)[(0, 0)];
    let v_hat = s2_1 / n1 as f64 + s2_0 / n0 as f64 - s2_tau_x / n as f64;
    let res1 = s2_1 - (s1x.transpose() * &s_x_inv * &s1x)[(0, 0)];
    let res0 = s2_0 - (s0x.transpose() * &s_x_inv * &s0x)[(0, 0)];
    let r2_hat = 1.0 - (res1 / n1 as f64 + res0 / n0 as f64) / v_hat;
    Ok((v_hat, r2_hat.clamp(0.0, R2_CEIL)))
}
