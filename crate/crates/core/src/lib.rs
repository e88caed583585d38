//! Design and analysis of rerandomized experiments under the Mahalanobis
//! covariate-balance criterion.
//!
//! The crate covers the full life cycle of a rerandomized two-arm experiment:
//!
//! * [`population`] — finite-population data model, CSV ingestion, covariate
//!   winsorization and leverage scores;
//! * [`design`] — complete randomization, accept–reject rerandomization,
//!   exhaustive enumeration and acceptance-probability estimation;
//! * [`constrained`] — the constrained Gaussian law `L_{K,a}` that governs the
//!   asymptotic behaviour of the difference-in-means estimator, its variance
//!   `v_{K,a}`, sampling and convolution quantiles;
//! * [`inference`] — difference-in-means, conservative variance/R² estimation
//!   with HC0–HC3 residual rescaling, and both confidence-interval
//!   constructions;
//! * [`diagnostics`] — Berry–Esseen bookkeeping, leverage decompositions and
//!   worst-case bias/RMSE of a design;
//! * [`specialfn`] — chi-square and Gaussian CDFs/quantiles built on the
//!   regularized incomplete gamma function;
//! * [`cli`] — the config-driven commands behind the `rerand` binary.
//!
//! All randomness flows through seeded ChaCha8 substreams ([`rng`]); every
//! stochastic routine is bit-reproducible for a fixed seed regardless of the
//! number of worker threads (see [`par`]).

pub mod cli;
pub mod constrained;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod par;
pub mod population;
pub mod rng;
pub mod specialfn;
pub mod synthetic;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
