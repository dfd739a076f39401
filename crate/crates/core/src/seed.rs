//! Counter-based seed derivation.
//!
//! Every random stream is a ChaCha8 generator keyed by a 64-bit seed and a
//! stream id, so rows and replicas can be generated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `r` of a run seeded with `seed`.
pub fn replica_seed(seed: u64, r: u64) -> u64 {
    seed ^ splitmix64(r)
}

/// Derive a child seed from a parent seed and a tag.
pub fn child_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

fn zigzag(y: i64) -> u64 {
    ((y << 1) ^ (y >> 63)) as u64
}

/// Generator for the creation stream of row `y`.
pub fn row_rng(seed: u64, y: i64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(zigzag(y));
    rng
}

/// Generator for an arbitrary purpose identified by `tag`.
pub fn rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, tag))
}
