//! Seeded random streams.
//!
//! Every random quantity in the crate comes from [`Rng`], a SplitMix64
//! generator (64-bit state, Steele, Lea & Flood 2014). Gaussian draws use
//! `rand_distr::StandardNormal` on top of it. Both are pure integer/float
//! arithmetic, so a given seed produces the same stream on every platform.
//!
//! Independent streams for concurrent runs are derived with [`stream`]:
//! `seed' = mix64(seed ^ mix64(index + 0x9E3779B97F4A7C15))` where `mix64` is
//! the SplitMix64 finalizer.

use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;

pub type Rng = rand_xoshiro::SplitMix64;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th independent stream derived from `seed`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

pub fn stream(seed: u64, index: u64) -> Rng {
    seeded(split_seed(seed, index))
}

pub fn gaussian(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| gaussian(rng)).collect()
}

/// Uniform draw in `[0, 1)`.
pub fn uniform(rng: &mut Rng) -> f64 {
    rng.gen::<f64>()
}

pub fn uniform_index(rng: &mut Rng, n: usize) -> usize {
    rng.gen_range(0..n)
}
