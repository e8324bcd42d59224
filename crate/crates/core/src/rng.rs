//! Seeded random streams.
//!
//! Every sampler runs on a ChaCha8 stream. Replica `i` of a sweep seeded
//! with `seed` uses the substream `seed ^ splitmix64(i)`, so replicas can be
//! evaluated in any order or on any worker and still reproduce.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th substream of `seed`.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
