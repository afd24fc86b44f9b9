//! Seedable pseudo-random source used by every simulation routine.
//!
//! The generator is xoshiro256** with its state expanded from a 64-bit seed
//! by splitmix64 (`rand_xoshiro`). Gaussian variates come from the
//! Box–Muller transform, so a given seed produces the same stream on every
//! platform.
//!
//! Independent streams are derived from a base seed plus a list of tags
//! (device id, frequency bits, run index, ...) so that results never depend
//! on the order in which work is scheduled.

use std::f64::consts::TAU;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Mixes a sequence of tags into a base seed with one splitmix64 step per
/// tag.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = SplitMix64::seed_from_u64(state).next_u64();
    for &tag in tags {
        state = state.wrapping_add(GOLDEN_GAMMA) ^ tag.wrapping_mul(GOLDEN_GAMMA) ^ out;
        out = SplitMix64::seed_from_u64(state).next_u64();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRng {
    inner: Xoshiro256StarStar,
    cached_normal: Option<u64>,
}

impl SimRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
            cached_normal: None,
        }
    }

    /// Stream for `(seed, tags...)`.
    pub fn derived(seed: u64, tags: &[u64]) -> Self {
        Self::seed_from_u64(derive_seed(seed, tags))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        self.inner.random()
    }

    /// Uniform in `[lo, hi]`. Returns `lo` when the range is degenerate.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`; `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        self.inner.random_range(0..n)
    }

    /// Standard normal variate (Box–Muller, both outputs used).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(bits) = self.cached_normal.take() {
            return f64::from_bits(bits);
        }
        // 1 - U lies in (0, 1] so the logarithm stays finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (TAU * u2).sin_cos();
        self.cached_normal = Some((radius * sin).to_bits());
        radius * cos
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        if std_dev == 0.0 {
            return mean;
        }
        mean + std_dev * self.standard_normal()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Index drawn proportionally to `weights`. Returns `None` when every
    /// weight is zero or the slice is empty.
    pub fn weighted_index(&mut self, weights: &[f64]) -> Option<usize> {
        WeightedIndex::new(weights).ok().map(|d| d.sample(&mut self.inner))
    }
}
