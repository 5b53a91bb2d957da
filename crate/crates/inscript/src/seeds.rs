//! Seed derivation for the deterministic RNG streams used across the crate.
//!
//! Every stochastic step (weight init, shuffling, pair sampling, augmentation
//! draws) gets its own ChaCha stream keyed by a user seed plus a domain tag,
//! so reordering one consumer never perturbs another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the tag and any number of u64 key parts.
pub(crate) fn subseed(tag: &str, parts: &[u64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in tag.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    for part in parts {
        for &b in &part.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

pub(crate) fn stream(tag: &str, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(tag, parts))
}

/// FNV-1a over raw bytes; used to key per-example augmentation streams.
pub(crate) fn hash_bytes(init: u64, bytes: &[u8]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = init;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
