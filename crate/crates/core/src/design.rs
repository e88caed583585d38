//! Assignment generation: complete randomization, Mahalanobis accept–reject
//! rerandomization, exhaustive enumeration and acceptance-probability
//! estimation.
//!
//! The rejection loop is the hot path: the covariance factorization is
//! computed once per population and each candidate costs one partial shuffle,
//! one treated-column sum and one triangular solve. Parallel searches run on
//! disjoint substreams in fixed-size chunks scanned in order, so the accepted
//! assignment — and the number of draws it took — is identical for every
//! thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::CholFactor;
use crate::par;
use crate::population::{covariate_moments, FinitePopulation};
use crate::rng::{stream_rng, DOMAIN_ACCEPTANCE, DOMAIN_REM};
use crate::specialfn::chi2_quantile;
use crate::{Error, Result};

/// A binary treatment assignment with exactly `n1` ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    z: Vec<u8>,
    n1: usize,
}

impl Assignment {
    pub fn new(z: Vec<u8>) -> Result<Self> {
        if z.iter().any(|&v| v > 1) {
            return Err(Error::validation("assignment entries must be 0 or 1"));
        }
        let n1 = z.iter().filter(|&&v| v == 1).count();
        if n1 == 0 || n1 == z.len() {
            return Err(Error::validation("assignment must contain both arms"));
        }
        Ok(Self { z, n1 })
    }

    pub fn from_treated_indices(n: usize, treated: &[u32]) -> Self {
        let mut z = vec![0u8; n];
        for &i in treated {
            z[i as usize] = 1;
        }
        Self {
            z,
            n1: treated.len(),
        }
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }
    pub fn n(&self) -> usize {
        self.z.len()
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n0(&self) -> usize {
        self.z.len() - self.n1
    }

    pub fn treated_indices(&self) -> Vec<u32> {
        self.z
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

/// Threshold specification: either the approximate acceptance probability
/// `p` (the threshold is then the `p`th chi-square quantile) or a direct `a`.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdMode {
    FromAcceptance(f64),
    Direct(f64),
}

/// Design configuration for the rerandomization search.
#[derive(Debug, Clone, Copy)]
pub struct DesignSpec {
    pub mode: ThresholdMode,
    pub max_draws: u64,
    pub seed: u64,
}

impl DesignSpec {
    pub const DEFAULT_MAX_DRAWS: u64 = 10_000_000;

    pub fn from_acceptance(p: f64, seed: u64) -> Self {
        Self {
            mode: ThresholdMode::FromAcceptance(p),
            max_draws: Self::DEFAULT_MAX_DRAWS,
            seed,
        }
    }

    pub fn direct(a: f64, seed: u64) -> Self {
        Self {
            mode: ThresholdMode::Direct(a),
            max_draws: Self::DEFAULT_MAX_DRAWS,
            seed,
        }
    }
}

/// Resolves the Mahalanobis threshold for `k` covariates. Acceptance
/// probability 1 means accept-everything: the threshold is infinite.
pub fn threshold(spec: &DesignSpec, k: u32) -> Result<f64> {
    match spec.mode {
        ThresholdMode::Direct(a) => {
            if a.is_nan() || a < 0.0 {
                Err(Error::validation(format!("threshold must be >= 0, got {a}")))
            } else {
                Ok(a)
            }
        }
        ThresholdMode::FromAcceptance(p) => {
            if !(p > 0.0 && p <= 1.0) {
                Err(Error::validation(format!(
                    "acceptance probability must lie in (0,1], got {p}"
                )))
            } else if p == 1.0 || k == 0 {
                Ok(f64::INFINITY)
            } else {
                chi2_quantile(p, k)
            }
        }
    }
}

/// Precomputed state for repeated Mahalanobis evaluations on one population:
/// the triangular factor of `S^2_X`, total column sums, and the scale
/// `n1 n0 / n`.
pub struct MahalanobisCache {
    chol: CholFactor,
    col_totals: Vec<f64>,
    n: usize,
    k: usize,
    n1: usize,
    n0: usize,
}

impl MahalanobisCache {
    pub fn new(pop: &FinitePopulation) -> Result<Self> {
        let (n, k) = (pop.n(), pop.k());
        if k == 0 {
            // No covariates: imbalance is identically zero (complete
            // randomization accepts everything).
            return Ok(Self {
                chol: CholFactor::new(&nalgebra::DMatrix::zeros(0, 0))?,
                col_totals: Vec::new(),
                n,
                k,
                n1: pop.n1(),
                n0: pop.n0(),
            });
        }
        let moments = covariate_moments(pop)?;
        let mut col_totals = vec![0.0_f64; k];
        for i in 0..n {
            for (t, &x) in col_totals.iter_mut().zip(pop.row(i)) {
                *t += x;
            }
        }
        Ok(Self {
            chol: moments.chol,
            col_totals,
            n,
            k,
            n1: pop.n1(),
            n0: pop.n0(),
        })
    }

    /// M for a treated-index set, using caller scratch of length 2k.
    /// One triangular solve, no explicit inverse.
    pub fn m_of_treated(&self, pop: &FinitePopulation, treated: &[u32], scratch: &mut [f64]) -> f64 {
        debug_assert_eq!(treated.len(), self.n1);
        debug_assert_eq!(scratch.len(), 2 * self.k);
        let (diff, solve_buf) = scratch.split_at_mut(self.k);
        diff.fill(0.0);
        for &i in treated {
            for (d, &x) in diff.iter_mut().zip(pop.row(i as usize)) {
                *d += x;
            }
        }
        // mean1 - mean0 from the treated sums and the fixed column totals.
        let inv_n1 = 1.0 / self.n1 as f64;
        let inv_n0 = 1.0 / self.n0 as f64;
        for (d, &t) in diff.iter_mut().zip(&self.col_totals) {
            let sum1 = *d;
            *d = sum1 * inv_n1 - (t - sum1) * inv_n0;
        }
        let scale = (self.n1 * self.n0) as f64 / self.n as f64;
        scale * self.chol.quad_form_inv_with(diff, solve_buf)
    }

    /// M for a full assignment vector.
    pub fn m_of(&self, pop: &FinitePopulation, asg: &Assignment) -> Result<f64> {
        if asg.n() != self.n || asg.n1() != self.n1 {
            return Err(Error::validation(
                "assignment dimensions do not match the population",
            ));
        }
        let treated = asg.treated_indices();
        let mut scratch = vec![0.0_f64; 2 * self.k];
        Ok(self.m_of_treated(pop, &treated, &mut scratch))
    }
}

/// Mahalanobis imbalance
/// `M = (n1 n0 / n) (mean1 - mean0)^T (S^2_X)^{-1} (mean1 - mean0)`.
pub fn mahalanobis(pop: &FinitePopulation, asg: &Assignment) -> Result<f64> {
    MahalanobisCache::new(pop)?.m_of(pop, asg)
}

/// One uniform completely randomized assignment via partial Fisher–Yates.
pub fn sample_cre(n: usize, n1: usize, rng: &mut ChaCha8Rng) -> Result<Assignment> {
    if n1 == 0 || n1 >= n {
        return Err(Error::validation(format!(
            "need 1 <= n1 < n, got n1={n1}, n={n}"
        )));
    }
    let mut indices: Vec<u32> = (0..n as u32).collect();
    partial_shuffle(&mut indices, n1, rng);
    let mut treated = indices[..n1].to_vec();
    treated.sort_unstable();
    Ok(Assignment::from_treated_indices(n, &treated))
}

/// Shuffles the first `n1` slots uniformly; starting from any permutation the
/// resulting prefix is a uniform n1-subset, so buffers can be reused across
/// draws without resetting.
#[inline]
fn partial_shuffle(indices: &mut [u32], n1: usize, rng: &mut ChaCha8Rng) {
    let n = indices.len();
    for i in 0..n1 {
        let j = i + rng.random_range(0..(n - i) as u32) as usize;
        indices.swap(i, j);
    }
}

/// Outcome of the rerandomization search.
#[derive(Debug, Clone)]
pub struct RemResult {
    pub assignment: Assignment,
    pub m_value: f64,
    pub draws_used: u64,
    pub threshold: f64,
}

const REM_CHUNK: u64 = 256;
const REM_WAVE_CHUNKS: u64 = 4;

struct ChunkOutcome {
    hit: Option<(u64, Vec<u32>, f64)>, // (local draw index, treated set, M)
    min_m: f64,
}

/// Draws completely randomized assignments until one satisfies `M <= a`.
///
/// The candidate sequence is fixed by `spec.seed` alone: substream `c`
/// contributes draws `[c*256, (c+1)*256)` of the conceptual sequence, chunks
/// are evaluated in waves and scanned in order, and the first success in
/// sequence order wins. `draws_used` is its 1-based position, which is
/// exactly the geometric accept–reject count.
pub fn sample_rem(pop: &FinitePopulation, spec: &DesignSpec) -> Result<RemResult> {
    let a = threshold(spec, pop.k() as u32)?;
    let cache = MahalanobisCache::new(pop)?;
    let (n, n1) = (pop.n(), pop.n1());
    if spec.max_draws == 0 {
        return Err(Error::validation("max_draws must be >= 1"));
    }

    let mut global_min_m = f64::INFINITY;
    let mut wave_start: u64 = 0;
    loop {
        let budget_exhausted = wave_start * REM_CHUNK >= spec.max_draws;
        if budget_exhausted {
            return Err(Error::MaxDrawsExceeded {
                draws: spec.max_draws,
                min_m: global_min_m,
            });
        }
        let chunks: Vec<u64> = (wave_start..wave_start + REM_WAVE_CHUNKS)
            .filter(|c| c * REM_CHUNK < spec.max_draws)
            .collect();
        let outcomes = par::map_chunks(chunks.len(), |i| {
            let chunk = chunks[i];
            let first_draw = chunk * REM_CHUNK;
            let budget = REM_CHUNK.min(spec.max_draws - first_draw);
            let mut rng = stream_rng(spec.seed, DOMAIN_REM, chunk);
            let mut indices: Vec<u32> = (0..n as u32).collect();
            let mut scratch = vec![0.0_f64; 2 * pop.k()];
            let mut min_m = f64::INFINITY;
            let mut hit = None;
            for local in 0..budget {
                partial_shuffle(&mut indices, n1, &mut rng);
                let m = cache.m_of_treated(pop, &indices[..n1], &mut scratch);
                min_m = min_m.min(m);
                if m <= a {
                    hit = Some((local, indices[..n1].to_vec(), m));
                    break;
                }
            }
            ChunkOutcome { hit, min_m }
        });
        for (i, outcome) in outcomes.iter().enumerate() {
            global_min_m = global_min_m.min(outcome.min_m);
            if let Some((local, treated, m)) = &outcome.hit {
                let mut treated = treated.clone();
                treated.sort_unstable();
                return Ok(RemResult {
                    assignment: Assignment::from_treated_indices(n, &treated),
                    m_value: *m,
                    draws_used: chunks[i] * REM_CHUNK + local + 1,
                    threshold: a,
                });
            }
        }
        wave_start += REM_WAVE_CHUNKS;
    }
}

/// Sequential variant of [`sample_rem`] over the same conceptual candidate
/// sequence, reusing a caller-owned factorization. Returns exactly what
/// `sample_rem` would for the same seed; replication loops use it to avoid
/// nested parallelism and repeated factorizations.
pub fn sample_rem_cached(
    pop: &FinitePopulation,
    cache: &MahalanobisCache,
    a: f64,
    seed: u64,
    max_draws: u64,
) -> Result<RemResult> {
    let (n, n1) = (pop.n(), pop.n1());
    let mut indices: Vec<u32> = (0..n as u32).collect();
    let mut scratch = vec![0.0_f64; 2 * pop.k()];
    let mut min_m = f64::INFINITY;
    let mut draws: u64 = 0;
    let mut chunk: u64 = 0;
    while draws < max_draws {
        let mut rng = stream_rng(seed, DOMAIN_REM, chunk);
        let budget = REM_CHUNK.min(max_draws - draws);
        for _ in 0..budget {
            draws += 1;
            partial_shuffle(&mut indices, n1, &mut rng);
            let m = cache.m_of_treated(pop, &indices[..n1], &mut scratch);
            min_m = min_m.min(m);
            if m <= a {
                let mut treated = indices[..n1].to_vec();
                treated.sort_unstable();
                return Ok(RemResult {
                    assignment: Assignment::from_treated_indices(n, &treated),
                    m_value: m,
                    draws_used: draws,
                    threshold: a,
                });
            }
        }
        chunk += 1;
    }
    Err(Error::MaxDrawsExceeded {
        draws: max_draws,
        min_m,
    })
}

/// Guard on exhaustive enumeration.
pub const ENUMERATION_GUARD: u64 = 1_000_000;

/// Number of assignments C(n, n1), saturating above the guard.
pub fn assignment_count(n: usize, n1: usize) -> u64 {
    let mut acc: u128 = 1;
    let r = n1.min(n - n1) as u128;
    for i in 0..r {
        acc = acc * (n as u128 - i) / (i + 1);
        if acc > 4 * ENUMERATION_GUARD as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All C(n, n1) assignments in lexicographic order of their treated-index
/// sets, each exactly once. Exactness oracle for small populations.
pub fn enumerate_assignments(n: usize, n1: usize) -> Result<Vec<Assignment>> {
    if n1 == 0 || n1 >= n {
        return Err(Error::validation(format!(
            "need 1 <= n1 < n, got n1={n1}, n={n}"
        )));
    }
    let count = assignment_count(n, n1);
    if count > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard {
            n,
            n1,
            guard: ENUMERATION_GUARD,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut comb: Vec<u32> = (0..n1 as u32).collect();
    loop {
        out.push(Assignment::from_treated_indices(n, &comb));
        // Advance to the next combination.
        let mut i = n1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if comb[i] < (n - n1 + i) as u32 {
                comb[i] += 1;
                for j in (i + 1)..n1 {
                    comb[j] = comb[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// How to estimate the actual acceptance probability `P(M <= a)`.
#[derive(Debug, Clone, Copy)]
pub enum AcceptanceMode {
    /// Enumerate every assignment (guarded).
    Exact,
    /// Fraction of `draws` completely randomized draws, with a binomial
    /// standard error.
    MonteCarlo { draws: u64, seed: u64 },
}

/// Estimated acceptance probability.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcceptanceEstimate {
    pub p_hat: f64,
    /// Binomial standard error; absent in exact mode.
    pub std_error: Option<f64>,
}

/// Estimates `P(M <= a)` under complete randomization.
pub fn estimate_acceptance(
    pop: &FinitePopulation,
    a: f64,
    mode: AcceptanceMode,
) -> Result<AcceptanceEstimate> {
    if a.is_infinite() {
        return Ok(AcceptanceEstimate {
            p_hat: 1.0,
            std_error: match mode {
                AcceptanceMode::Exact => None,
                AcceptanceMode::MonteCarlo { .. } => Some(0.0),
            },
        });
    }
    let cache = MahalanobisCache::new(pop)?;
    match mode {
        AcceptanceMode::Exact => {
            let all = enumerate_assignments(pop.n(), pop.n1())?;
            let mut scratch = vec![0.0_f64; 2 * pop.k()];
            let mut accepted = 0u64;
            for asg in &all {
                let treated = asg.treated_indices();
                if cache.m_of_treated(pop, &treated, &mut scratch) <= a {
                    accepted += 1;
                }
            }
            Ok(AcceptanceEstimate {
                p_hat: accepted as f64 / all.len() as f64,
                std_error: None,
            })
        }
        AcceptanceMode::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(Error::validation("Monte Carlo draws must be >= 1"));
            }
            const CHUNK: u64 = 4096;
            let n_chunks = draws.div_ceil(CHUNK);
            let counts = par::map_chunks(n_chunks as usize, |c| {
                let c = c as u64;
                let budget = CHUNK.min(draws - c * CHUNK);
                let mut rng = stream_rng(seed, DOMAIN_ACCEPTANCE, c);
                let mut indices: Vec<u32> = (0..pop.n() as u32).collect();
                let mut scratch = vec![0.0_f64; 2 * pop.k()];
                let mut hits = 0u64;
                for _ in 0..budget {
                    partial_shuffle(&mut indices, pop.n1(), &mut rng);
                    if cache.m_of_treated(pop, &indices[..pop.n1()], &mut scratch) <= a {
                        hits += 1;
                    }
                }
                hits
            });
            let hits: u64 = counts.iter().sum();
            let p_hat = hits as f64 / draws as f64;
            Ok(AcceptanceEstimate {
                p_hat,
                std_error: Some((p_hat * (1.0 - p_hat) / draws as f64).sqrt()),
            })
        }
    }
}
