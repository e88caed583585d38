//! Small dense linear-algebra helpers shared by the statistical modules.
//!
//! Covariate dimension is at most a few hundred, so everything here is plain
//! dense arithmetic. The Cholesky factorization enforces the crate-wide
//! singularity contract: a pivot below `1e-12` times the largest input
//! diagonal is an error, never a silent regularization.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative pivot threshold below which a covariance is declared singular.
pub const SINGULARITY_PIVOT_REL: f64 = 1e-12;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholFactor {
    l: DMatrix<f64>,
}

impl CholFactor {
    /// Factorizes `m = L L^T`. Fails with a singularity report when a pivot
    /// drops below the relative threshold.
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let k = m.nrows();
        assert_eq!(k, m.ncols());
        let max_diag = (0..k).map(|j| m[(j, j)]).fold(0.0_f64, f64::max);
        if k == 0 {
            return Ok(Self {
                l: DMatrix::zeros(0, 0),
            });
        }
        let floor = SINGULARITY_PIVOT_REL * max_diag.max(f64::MIN_POSITIVE);
        let mut l = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut d = m[(j, j)];
            for t in 0..j {
                d -= l[(j, t)] * l[(j, t)];
            }
            if d.is_nan() || d <= floor {
                return Err(Error::SingularCovariance(format!(
                    "pivot {d:.3e} at column {j} below {floor:.3e} (relative threshold {SINGULARITY_PIVOT_REL:.0e})"
                )));
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..k {
                let mut s = m[(i, j)];
                for t in 0..j {
                    s -= l[(i, t)] * l[(j, t)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L y = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let k = self.dim();
        debug_assert_eq!(b.len(), k);
        for i in 0..k {
            let mut s = b[i];
            for t in 0..i {
                s -= self.l[(i, t)] * b[t];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `L^T x = y` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_upper_in_place(&self, y: &mut [f64]) {
        let k = self.dim();
        debug_assert_eq!(y.len(), k);
        for i in (0..k).rev() {
            let mut s = y[i];
            for t in (i + 1)..k {
                s -= self.l[(t, i)] * y[t];
            }
            y[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `(L L^T) x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    /// Quadratic form `v^T M^{-1} v = ||L^{-1} v||^2`, allocation-free via a
    /// caller-provided scratch buffer of length `dim`.
    pub fn quad_form_inv_with(&self, v: &[f64], scratch: &mut [f64]) -> f64 {
        scratch.copy_from_slice(v);
        self.solve_lower_in_place(scratch);
        scratch.iter().map(|x| x * x).sum()
    }

    /// Quadratic form `v^T M^{-1} v`.
    pub fn quad_form_inv(&self, v: &[f64]) -> f64 {
        let mut scratch = v.to_vec();
        self.solve_lower_in_place(&mut scratch);
        scratch.iter().map(|x| x * x).sum()
    }
}

/// Symmetric inverse square root `M^{-1/2}` via eigendecomposition; the
/// deterministic choice of root for the standardization in the Berry–Esseen
/// quantities. Fails when an eigenvalue falls below the relative threshold.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let floor = SINGULARITY_PIVOT_REL * max_ev.max(f64::MIN_POSITIVE);
    let mut inv_sqrt = DVector::zeros(eig.eigenvalues.len());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.is_nan() || ev <= floor {
            return Err(Error::SingularCovariance(format!(
                "eigenvalue {ev:.3e} below {floor:.3e} in symmetric square root"
            )));
        }
        inv_sqrt[i] = 1.0 / ev.sqrt();
    }
    let u = &eig.eigenvectors;
    Ok(u * DMatrix::from_diagonal(&inv_sqrt) * u.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(k: usize, seed: u64) -> DMatrix<f64> {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(seed, 0x30, 0);
        let a = DMatrix::from_fn(k + 2, k, |_, _| rng.random::<f64>() - 0.5);
        a.transpose() * a + DMatrix::identity(k, k) * 0.05
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = spd(6, 1);
        let f = CholFactor::new(&m).unwrap();
        let rebuilt = &f.l * f.l.transpose();
        assert!((&rebuilt - &m).abs().max() < 1e-12);
    }

    #[test]
    fn solve_matches_direct_inverse() {
        let m = spd(5, 2);
        let f = CholFactor::new(&m).unwrap();
        let b: Vec<f64> = (0..5).map(|i| (i as f64) - 1.3).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let direct = m.clone().try_inverse().unwrap() * DVector::from_vec(b.clone());
        for i in 0..5 {
            assert!((x[i] - direct[i]).abs() < 1e-10);
        }
        let qf = f.quad_form_inv(&b);
        let expect = DVector::from_vec(b).dot(&direct);
        assert!((qf - expect).abs() < 1e-10);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = spd(4, 3);
        // Duplicate a column/row pair to force rank deficiency.
        for i in 0..4 {
            m[(i, 3)] = m[(i, 2)];
            m[(3, i)] = m[(2, i)];
        }
        m[(3, 3)] = m[(2, 2)];
        match CholFactor::new(&m) {
            Err(Error::SingularCovariance(_)) => {}
            other => panic!("expected singularity error, got {other:?}"),
        }
    }

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let m = spd(4, 4);
        let r = sym_inv_sqrt(&m).unwrap();
        let should_be_identity = &r * &m * &r;
        assert!((should_be_identity - DMatrix::identity(4, 4)).abs().max() < 1e-10);
    }
}
