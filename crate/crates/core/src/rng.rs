//! Seed derivation. Every random choice in the crate draws from a
//! `ChaCha8Rng` seeded through [`derive_seed`], so one base seed fixes a
//! whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent consumers of one base seed apart.
pub mod stream {
    pub const NOISE: u64 = 1;
    pub const DELTA_TIE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const CORPUS: u64 = 4;
    pub const MODEL: u64 = 5;
    pub const ICA: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(stream, index)` under `base`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

pub fn rng_for(base: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, index))
}
