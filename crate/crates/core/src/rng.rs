//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by `(seed, tag[, index])`, so streams are reproducible and disjoint.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_THETA: u64 = 1;
pub(crate) const TAG_CONTEXT: u64 = 2;
pub(crate) const TAG_CORRUPTION: u64 = 3;
pub(crate) const TAG_ESTIMATOR: u64 = 4;
pub(crate) const TAG_POTENTIAL: u64 = 5;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from a parent seed and a tag.
pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(splitmix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub(crate) fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for a given round, independent of how many rounds were drawn before.
pub(crate) fn round_stream(seed: u64, tag: u64, t: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, tag), t))
}
