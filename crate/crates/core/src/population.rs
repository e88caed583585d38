//! Finite-population data model, CSV ingestion, covariate preprocessing and
//! leverage scores.
//!
//! A [`FinitePopulation`] holds the covariate matrix for all `n` experimental
//! units, the planned group sizes `n1`/`n0`, and (when available) both
//! potential outcomes. It is immutable after construction and safe to share
//! across threads; every operation here is a pure function of its inputs.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::CholFactor;
use crate::{Error, Result};

/// n units with a K-column covariate matrix, optional potential outcomes and
/// the planned treated/control group sizes.
#[derive(Debug, Clone)]
pub struct FinitePopulation {
    covariates: Vec<f64>, // row-major n x k
    n: usize,
    k: usize,
    y1: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    n1: usize,
    n0: usize,
    labels: Option<Vec<String>>,
}

impl FinitePopulation {
    pub fn new(
        covariates: Vec<f64>,
        n: usize,
        k: usize,
        y1: Option<Vec<f64>>,
        y0: Option<Vec<f64>>,
        n1: usize,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("population needs at least 2 units"));
        }
        if n1 == 0 || n1 >= n {
            return Err(Error::validation(format!(
                "n1 must satisfy 1 <= n1 < n, got n1={n1}, n={n}"
            )));
        }
        if covariates.len() != n * k {
            return Err(Error::validation(format!(
                "covariate matrix has {} entries, expected {}",
                covariates.len(),
                n * k
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("covariates contain non-finite values"));
        }
        for (name, y) in [("y1", &y1), ("y0", &y0)] {
            if let Some(y) = y {
                if y.len() != n {
                    return Err(Error::validation(format!(
                        "{name} has length {}, expected {n}",
                        y.len()
                    )));
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation(format!("{name} contains non-finite values")));
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::validation("labels length mismatch"));
            }
        }
        Ok(Self {
            covariates,
            n,
            k,
            y1,
            y0,
            n1,
            n0: n - n1,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n0(&self) -> usize {
        self.n0
    }
    pub fn r1(&self) -> f64 {
        self.n1 as f64 / self.n as f64
    }
    pub fn r0(&self) -> f64 {
        self.n0 as f64 / self.n as f64
    }
    pub fn y1(&self) -> Option<&[f64]> {
        self.y1.as_deref()
    }
    pub fn y0(&self) -> Option<&[f64]> {
        self.y0.as_deref()
    }
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Covariate row for unit `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.k..(i + 1) * self.k]
    }

    /// Covariate matrix as an n x K `DMatrix`.
    pub fn covariate_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.k, |i, j| self.covariates[i * self.k + j])
    }

    /// Same population restricted to the first `k` covariate columns; used by
    /// design sweeps over the number of covariates.
    pub fn with_first_k_covariates(&self, k: usize) -> Self {
        assert!(k <= self.k);
        let mut covariates = Vec::with_capacity(self.n * k);
        for i in 0..self.n {
            covariates.extend_from_slice(&self.row(i)[..k]);
        }
        Self {
            covariates,
            k,
            ..self.clone()
        }
    }

    /// Population with both potential outcomes attached.
    pub fn with_outcomes(&self, y1: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        Self::new(
            self.covariates.clone(),
            self.n,
            self.k,
            Some(y1),
            Some(y0),
            self.n1,
            self.labels.clone(),
        )
    }
}

/// Finite-population covariate mean, covariance `S^2_X` (divisor n-1) and its
/// lower-triangular factor for Mahalanobis solves.
#[derive(Debug, Clone)]
pub struct CovariateMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub chol: CholFactor,
}

/// Mean and S^2_X with a reusable triangular factorization. Factorization
/// failure reports singularity (duplicated or collinear covariates).
pub fn covariate_moments(pop: &FinitePopulation) -> Result<CovariateMoments> {
    let (n, k) = (pop.n(), pop.k());
    if k == 0 {
        return Err(Error::validation("covariate moments need K >= 1"));
    }
    let mut mean = vec![0.0_f64; k];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(pop.row(i)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = DMatrix::zeros(k, k);
    let mut centered = vec![0.0_f64; k];
    for i in 0..n {
        for (c, (&x, &m)) in centered.iter_mut().zip(pop.row(i).iter().zip(&mean)) {
            *c = x - m;
        }
        for a in 0..k {
            for b in a..k {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..k {
        for b in a..k {
            cov[(a, b)] /= denom;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let chol = CholFactor::new(&cov)?;
    Ok(CovariateMoments {
        mean: DVector::from_vec(mean),
        cov,
        chol,
    })
}

/// Winsorizes every covariate column at its empirical `lower_q` and `upper_q`
/// quantiles. The empirical quantile is the order statistic at index
/// ceil(q * n), 1-based; `q = 0` and `q = 1` therefore clip at the column
/// extremes, leaving it unchanged. Group sizes and outcomes pass through.
pub fn trim_covariates(pop: &FinitePopulation, lower_q: f64, upper_q: f64) -> Result<FinitePopulation> {
    if !(0.0..=1.0).contains(&lower_q) || !(0.0..=1.0).contains(&upper_q) || lower_q >= upper_q {
        return Err(Error::validation(format!(
            "trim quantiles must satisfy 0 <= lower < upper <= 1, got ({lower_q}, {upper_q})"
        )));
    }
    let (n, k) = (pop.n(), pop.k());
    let mut covariates = pop.covariates.clone();
    let mut column = vec![0.0_f64; n];
    for j in 0..k {
        for i in 0..n {
            column[i] = covariates[i * k + j];
        }
        column.sort_by(f64::total_cmp);
        let lo = column[order_stat_index(lower_q, n)];
        let hi = column[order_stat_index(upper_q, n)];
        for i in 0..n {
            let v = &mut covariates[i * k + j];
            *v = v.clamp(lo, hi);
        }
    }
    Ok(FinitePopulation {
        covariates,
        ..pop.clone()
    })
}

/// 0-based index of the ceil(q*n) order statistic (1-based rule, q=0 -> min).
fn order_stat_index(q: f64, n: usize) -> usize {
    let idx = (q * n as f64).ceil() as usize;
    idx.clamp(1, n) - 1
}

/// Leverage scores of the column-centered covariate matrix plus the summary
/// quantities used in design diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct LeverageReport {
    /// Diagonal of the hat matrix of the centered covariates, each in [0,1].
    pub h: Vec<f64>,
    /// Sum of H_ii^{3/2}.
    pub sum_h32: f64,
    /// Largest leverage.
    pub max_h: f64,
    /// Smallest achievable sum of H_ii^{3/2}: K^{3/2}/sqrt(n).
    pub min_sum_h32: f64,
    /// Smallest achievable maximum leverage: K/n.
    pub min_max_h: f64,
}

/// Hat-matrix diagonal from the centered covariates, so that
/// `(n-1) H_ii = (x_i - mean)^T (S^2_X)^{-1} (x_i - mean)` holds exactly.
pub fn leverage_scores(pop: &FinitePopulation) -> Result<LeverageReport> {
    let (n, k) = (pop.n(), pop.k());
    let mut h = vec![0.0_f64; n];
    if k > 0 {
        let moments = covariate_moments(pop)?;
        let mut centered = vec![0.0_f64; k];
        let mut scratch = vec![0.0_f64; k];
        let denom = (n - 1) as f64;
        for (i, hi) in h.iter_mut().enumerate() {
            for (c, (&x, &m)) in centered
                .iter_mut()
                .zip(pop.row(i).iter().zip(moments.mean.iter()))
            {
                *c = x - m;
            }
            *hi = moments.chol.quad_form_inv_with(&centered, &mut scratch) / denom;
        }
    }
    let kf = k as f64;
    let nf = n as f64;
    let sum_h32 = h.iter().map(|v| v.powf(1.5)).sum();
    let max_h = h.iter().fold(0.0_f64, |a, &b| a.max(b));
    Ok(LeverageReport {
        h,
        sum_h32,
        max_h,
        min_sum_h32: kf.powf(1.5) / nf.sqrt(),
        min_max_h: kf / nf,
    })
}

// ---------------------------------------------------------------------------
// Finite-population truth quantities (require both potential outcomes).
// ---------------------------------------------------------------------------

fn both_outcomes(pop: &FinitePopulation) -> Result<(&[f64], &[f64])> {
    match (pop.y1(), pop.y0()) {
        (Some(y1), Some(y0)) => Ok((y1, y0)),
        _ => Err(Error::validation(
            "operation requires both potential outcomes y1 and y0",
        )),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Finite-population variance with divisor n-1.
pub fn fp_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Finite-population covariance vector of `v` with each covariate column.
fn fp_cov_with_covariates(pop: &FinitePopulation, v: &[f64]) -> Vec<f64> {
    let (n, k) = (pop.n(), pop.k());
    let mv = mean(v);
    let mut mx = vec![0.0_f64; k];
    for i in 0..n {
        for (m, &x) in mx.iter_mut().zip(pop.row(i)) {
            *m += x;
        }
    }
    for m in &mut mx {
        *m /= n as f64;
    }
    let mut cov = vec![0.0_f64; k];
    for (i, &vi) in v.iter().enumerate() {
        let dv = vi - mv;
        for (c, (&x, &m)) in cov.iter_mut().zip(pop.row(i).iter().zip(&mx)) {
            *c += dv * (x - m);
        }
    }
    for c in &mut cov {
        *c /= (n - 1) as f64;
    }
    cov
}

/// Average treatment effect `tau`.
pub fn average_treatment_effect(pop: &FinitePopulation) -> Result<f64> {
    let (y1, y0) = both_outcomes(pop)?;
    Ok(mean(y1) - mean(y0))
}

/// The variance of the difference-in-means estimator under complete
/// randomization: `S^2_1/n1 + S^2_0/n0 - S^2_tau/n`.
pub fn v_tau_tau(pop: &FinitePopulation) -> Result<f64> {
    let (y1, y0) = both_outcomes(pop)?;
    let tau: Vec<f64> = y1.iter().zip(y0).map(|(a, b)| a - b).collect();
    Ok(fp_variance(y1) / pop.n1() as f64 + fp_variance(y0) / pop.n0() as f64
        - fp_variance(&tau) / pop.n() as f64)
}

/// Squared multiple correlation between the difference-in-means of outcome
/// and of covariates under complete randomization.
pub fn r_squared(pop: &FinitePopulation) -> Result<f64> {
    let (y1, y0) = both_outcomes(pop)?;
    if pop.k() == 0 {
        return Ok(0.0);
    }
    let moments = covariate_moments(pop)?;
    let s1x = fp_cov_with_covariates(pop, y1);
    let s0x = fp_cov_with_covariates(pop, y0);
    let proj = |s: &[f64]| moments.chol.quad_form_inv(s);
    let dx: Vec<f64> = s1x.iter().zip(&s0x).map(|(a, b)| a - b).collect();
    let numer = proj(&s1x) / pop.n1() as f64 + proj(&s0x) / pop.n0() as f64
        - moments.chol.quad_form_inv(&dx) / pop.n() as f64;
    Ok(numer / v_tau_tau(pop)?)
}

/// Finite-population residual variance `S^2_{z \ X} = S^2_z - S^2_{z|X}` for
/// arm `z`'s potential outcome projected on the covariates.
pub fn residual_variance(pop: &FinitePopulation, arm: u8) -> Result<f64> {
    let (y1, y0) = both_outcomes(pop)?;
    let y = if arm == 1 { y1 } else { y0 };
    let s2 = fp_variance(y);
    if pop.k() == 0 {
        return Ok(s2);
    }
    let moments = covariate_moments(pop)?;
    let syx = fp_cov_with_covariates(pop, y);
    Ok(s2 - moments.chol.quad_form_inv(&syx))
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Column roles for loading a population table.
#[derive(Debug, Clone, Default)]
pub struct TableSchema {
    pub covariates: Vec<String>,
    pub y1: Option<String>,
    pub y0: Option<String>,
    /// Observed outcome column (analysis stage).
    pub y: Option<String>,
    /// Assignment column of 0/1 (analysis stage).
    pub z: Option<String>,
    pub label: Option<String>,
}

/// A parsed table with columns resolved by role; rows keep file order.
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub covariates: Vec<f64>, // row-major n x k
    pub n: usize,
    pub k: usize,
    pub y1: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub z: Option<Vec<u8>>,
    pub labels: Option<Vec<String>>,
}

/// Reads a delimiter-separated table with a header row and extracts the
/// columns named in `schema`. Cell coordinates in errors are 1-based and
/// count data rows (the header is row 0).
pub fn read_table<R: Read>(reader: R, schema: &TableSchema) -> Result<LoadedTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("column '{name}' not found in header")))
    };
    let cov_idx: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let y1_idx = schema.y1.as_deref().map(col_index).transpose()?;
    let y0_idx = schema.y0.as_deref().map(col_index).transpose()?;
    let y_idx = schema.y.as_deref().map(col_index).transpose()?;
    let z_idx = schema.z.as_deref().map(col_index).transpose()?;
    let label_idx = schema.label.as_deref().map(col_index).transpose()?;

    let k = cov_idx.len();
    let mut covariates = Vec::new();
    let mut y1 = y1_idx.map(|_| Vec::new());
    let mut y0 = y0_idx.map(|_| Vec::new());
    let mut y = y_idx.map(|_| Vec::new());
    let mut z = z_idx.map(|_| Vec::new());
    let mut labels = label_idx.map(|_| Vec::new());

    for (row_i, record) in rdr.records().enumerate() {
        let record = record?;
        let numeric_cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).ok_or(Error::MissingCell {
                row: row_i + 1,
                col: col + 1,
            })?;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                return Err(Error::MissingCell {
                    row: row_i + 1,
                    col: col + 1,
                });
            }
            trimmed.parse::<f64>().map_err(|_| Error::NonNumeric {
                row: row_i + 1,
                col: col + 1,
            })
        };
        for &c in &cov_idx {
            covariates.push(numeric_cell(c)?);
        }
        if let (Some(c), Some(out)) = (y1_idx, y1.as_mut()) {
            out.push(numeric_cell(c)?);
        }
        if let (Some(c), Some(out)) = (y0_idx, y0.as_mut()) {
            out.push(numeric_cell(c)?);
        }
        if let (Some(c), Some(out)) = (y_idx, y.as_mut()) {
            out.push(numeric_cell(c)?);
        }
        if let (Some(c), Some(out)) = (z_idx, z.as_mut()) {
            let v = numeric_cell(c)?;
            if v != 0.0 && v != 1.0 {
                return Err(Error::validation(format!(
                    "assignment column must be 0/1, got {v} at row {}",
                    row_i + 1
                )));
            }
            out.push(v as u8);
        }
        if let (Some(c), Some(out)) = (label_idx, labels.as_mut()) {
            out.push(record.get(c).unwrap_or("").to_string());
        }
    }
    let n = covariates.len() / k.max(1);
    if k == 0 {
        // Row count still needed when only outcomes are loaded.
        let n_from = [&y1, &y0, &y]
            .iter()
            .filter_map(|v| v.as_ref().map(Vec::len))
            .next()
            .unwrap_or(0);
        return Ok(LoadedTable {
            covariates,
            n: n_from,
            k,
            y1,
            y0,
            y,
            z,
            labels,
        });
    }
    Ok(LoadedTable {
        covariates,
        n,
        k,
        y1,
        y0,
        y,
        z,
        labels,
    })
}

/// Loads a validated population from a delimited text stream. `n1` is the
/// planned treated-group size; rows keep file order.
pub fn load_population<R: Read>(
    reader: R,
    schema: &TableSchema,
    n1: usize,
) -> Result<FinitePopulation> {
    let table = read_table(reader, schema)?;
    if table.n == 0 {
        return Err(Error::validation("input table has no data rows"));
    }
    FinitePopulation::new(
        table.covariates,
        table.n,
        table.k,
        table.y1,
        table.y0,
        n1,
        table.labels,
    )
}
