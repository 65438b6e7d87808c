//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a
//! `(base, stream, index)` triple, so that sub-streams (ignitions of year 7,
//! fire 3 of year 12, tree 4 of iteration 9, ...) never depend on how many
//! numbers other streams consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used throughout the crate.
pub mod stream {
    pub const LANDSCAPE: u64 = 0x01;
    pub const IGNITIONS: u64 = 0x02;
    pub const FIRE: u64 = 0x03;
    pub const SEED_POLICIES: u64 = 0x10;
    pub const DB_ROLLOUT: u64 = 0x11;
    pub const SURROGATE: u64 = 0x12;
    pub const FOREST: u64 = 0x20;
    pub const PROPOSAL: u64 = 0x21;
    pub const INITIAL_DESIGN: u64 = 0x22;
    pub const VALIDATION: u64 = 0x30;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a child seed from a parent seed, a stream tag and an index.
#[inline]
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(base ^ mix64(stream)) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Uniform in `[0, 1)` from a 64-bit hash value.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(base: u64, stream: u64, index: u64) -> ChaCha8Rng {
    seeded_rng(derive_seed(base, stream, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_separate_streams() {
        assert_ne!(derive_seed(1, stream::FIRE, 0), derive_seed(1, stream::IGNITIONS, 0));
        assert_ne!(derive_seed(1, stream::FIRE, 0), derive_seed(1, stream::FIRE, 1));
        assert_eq!(derive_seed(9, stream::FIRE, 3), derive_seed(9, stream::FIRE, 3));
    }

    #[test]
    fn unit_interval() {
        for i in 0..10_000u64 {
            let u = unit_f64(mix64(i));
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }
}
