//! Seeded, counter-based random streams.
//!
//! Every stochastic routine in the crate draws from ChaCha8, a counter-based
//! generator with 2^64 independent streams per seed. A (seed, domain, index)
//! triple pins one stream: the domain tag separates unrelated consumers so
//! that, e.g., the rerandomization search and the Monte Carlo quantile sampler
//! never share a stream even under the same user seed. Substream indices are
//! what make chunked parallel execution reproducible: chunk `i` always reads
//! stream `i` no matter which thread runs it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rerandomization accept–reject search chunks.
pub const DOMAIN_REM: u64 = 0x01;
/// Monte Carlo acceptance-probability / propensity estimation chunks.
pub const DOMAIN_ACCEPTANCE: u64 = 0x02;
/// Constrained-Gaussian convolution sampler chunks.
pub const DOMAIN_NU: u64 = 0x03;
/// Standalone `L_{K,a}` draws.
pub const DOMAIN_L: u64 = 0x04;
/// Synthetic population generation.
pub const DOMAIN_SYNTHETIC: u64 = 0x05;
/// Simulation-harness replications.
pub const DOMAIN_REPLICATION: u64 = 0x06;
/// Power-iteration random restart vector.
pub const DOMAIN_POWER_RESTART: u64 = 0x07;
/// Design-moment Monte Carlo draws.
pub const DOMAIN_DESIGN_MC: u64 = 0x08;

/// ChaCha8 stream pinned by (seed, domain, index). `index` must fit in 48
/// bits; the top 16 bits of the stream id carry the domain tag.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << 48), "substream index overflow");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) | index);
    rng
}
