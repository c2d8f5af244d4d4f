//! Deterministic RNG construction.
//!
//! Everything in this crate that draws random numbers goes through these
//! helpers so that a run is fully reproducible from the configured seeds.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Seeded generator with a stable stream across platforms and releases.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Derives an independent sub-seed from a base seed and an index, e.g. one
/// seed per sampler read or per local-model center.
pub fn derive(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
