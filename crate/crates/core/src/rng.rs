//! Seed derivation. Every randomized step takes an explicit seed; sub-streams
//! are derived by mixing the caller's seed with a fixed purpose tag so that
//! independent stages never share a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_BANK: u64 = 0x01;
pub const TAG_TRAIN: u64 = 0x02;
pub const TAG_AMPLITUDE: u64 = 0x03;
pub const TAG_SUPERPOSITION: u64 = 0x04;
pub const TAG_WHITE: u64 = 0x05;
pub const TAG_PROGRAM: u64 = 0x06;
pub const TAG_VMM: u64 = 0x07;
pub const TAG_KMEANS: u64 = 0x08;

/// splitmix64 finalizer; stable across platforms and releases.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from `(seed, tag)`.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Derives a sub-seed with an extra index (per-unit, per-spike, per-level...).
pub fn mix2(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(mix(seed, tag) ^ splitmix64(index.wrapping_add(0x5151_5151)))
}

/// Seeded generator for the given purpose.
pub fn rng_for(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tag))
}

/// Seeded generator for the given purpose and index.
pub fn rng_for2(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix2(seed, tag, index))
}
