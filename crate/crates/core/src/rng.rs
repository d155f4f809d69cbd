//! Deterministic seed derivation.
//!
//! Every stochastic component draws from its own ChaCha stream whose seed is
//! derived from a base seed and a tuple of integer tags. Streams never share
//! state, so evaluation order (sequential or parallel) cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `base`, yielding a well-separated child seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0xD1B5_4A32_D192_ED03))))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(base: u64, tags: &[u64]) -> Rng {
    rng_from_seed(derive_seed(base, tags))
}
