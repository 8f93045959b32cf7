//! Deterministic seeding.
//!
//! A single user-facing seed fans out to per-purpose streams through a fixed
//! mix, so adding a consumer or reordering work never shifts the randomness
//! seen by unrelated code. All sampling in the crate goes through
//! [`ChaCha12Rng`] streams created here; nothing touches a thread-local RNG.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer. Fixed forever: changing it changes every artifact.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a over the tag bytes
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from a parent seed and a purpose tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    mix64(seed ^ tag_hash(tag))
}

/// Derive a child seed from a parent seed and an index (e.g. a corpus pair).
pub fn derive_seed_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    mix64(derive_seed(seed, tag) ^ mix64(index))
}

/// A ChaCha stream for the given seed and purpose.
pub fn stream(seed: u64, tag: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(seed, tag))
}

/// A ChaCha stream for the given seed, purpose, and index.
pub fn stream_indexed(seed: u64, tag: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed_indexed(seed, tag, index))
}
