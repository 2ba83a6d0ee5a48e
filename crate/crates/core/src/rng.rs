//! Seeded random streams.
//!
//! Every filter run owns one [`SimRng`]. Independent runs get their seeds
//! from [`derive_seed`], which mixes a parent seed with a tag (level,
//! replicate index, ...) so that distinct tags give unrelated streams.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

pub type SimRng = rand_chacha::ChaCha8Rng;

/// Tag reserved for the level draw of randomized estimators.
pub const LEVEL_DRAW_TAG: u64 = u64::MAX;

pub fn sim_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `tag` under `parent`.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)))
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
