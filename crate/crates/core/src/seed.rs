//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a pure
//! function of the master seed and a tuple of indices, so work items can run
//! in any order on any number of workers and still produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags for seeds that are not tied to a grid cell.
pub mod tag {
    pub const TEST_SET: u64 = 0x7465_7374;
    pub const INITIAL_DOE: u64 = 0x646f_6500;
    pub const CELL: u64 = 0x6365_6c6c;
    pub const FIT: u64 = 0x6669_7400;
    pub const CORRELATION: u64 = 0x636f_7272;
}

/// SplitMix64 finaliser.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of `(master, parts...)`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
