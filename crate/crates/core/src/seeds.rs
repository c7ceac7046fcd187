//! Deterministic derivation of independent random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived from a master seed and a short path of indices (stream tag, trial
//! index, round index, ...). The derivation is a splitmix64 chain, so nearby
//! index paths give unrelated seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Stream tags keep the per-trial information, noise and decoder streams apart.
pub mod stream {
    pub const INFO: u64 = 0x1f0;
    pub const NOISE: u64 = 0x2b1;
    pub const DECODER: u64 = 0x3c2;
    pub const POOL_CODE: u64 = 0x4d3;
    pub const POOL_TRIAL: u64 = 0x5e4;
    pub const ROUND: u64 = 0x6f5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(seed: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, path))
}

/// Generator for decoding round `round` of a decode seeded with `seed`.
pub fn round_rng(seed: u64, round: u64) -> SimRng {
    rng_from(seed, &[stream::ROUND, round])
}
