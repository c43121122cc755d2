//! Deterministic seed derivation.
//!
//! Every stochastic component in the crate draws from a ChaCha8 stream whose
//! seed is derived from a base seed plus a stream index. The derivation is a
//! SplitMix64 mix, so streams for distinct indices are decorrelated and a
//! rollout's stream never depends on how many sibling streams exist.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 output step.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(base, stream)`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(stream.wrapping_add(0x1234_5678_9ABC_DEF0)))
}

/// A ChaCha8 generator for the derived stream `(base, stream)`.
pub fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}

/// A ChaCha8 generator seeded directly from `seed`.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
