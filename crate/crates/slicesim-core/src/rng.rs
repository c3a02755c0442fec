//! Deterministic random source shared by every stochastic component.
//!
//! All draws go through [`RandomSource`], a thin wrapper over a counter-based
//! stream cipher generator. Identical seeds and identical call sequences
//! produce identical outputs on every platform, which is what makes training
//! logs, checkpoints and evaluation reports reproducible byte for byte.

use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

/// Mixes a seed and a tag into a fresh 64-bit seed (splitmix64 finalizer).
///
/// Used to derive independent sub-streams: per-episode seeds, the noise
/// stream of the online environment, network initialization, and so on.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random generator with the distribution kinds the
/// simulator needs: uniform reals, uniform integers, Bernoulli and Gaussian.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha12Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// A new source on an independent stream derived from `seed` and `tag`.
    pub fn derived(seed: u64, tag: u64) -> Self {
        Self::new(derive_seed(seed, tag))
    }

    /// Uniform real in `[lo, hi)`; degenerate interval returns `lo`.
    pub fn uniform_f64(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        self.rng.sample(Uniform::new(lo, hi))
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn uniform_u32(&mut self, n: u32) -> u32 {
        assert!(n > 0, "uniform_u32 needs a positive bound");
        self.rng.gen_range(0..n)
    }

    pub fn uniform_usize(&mut self, n: usize) -> usize {
        assert!(n > 0, "uniform_usize needs a positive bound");
        self.rng.gen_range(0..n)
    }

    /// Bernoulli draw; `p` outside `[0, 1]` is clamped.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        if p <= 0.0 {
            return false;
        }
        self.rng.gen_bool(p)
    }

    /// Gaussian draw. `std` must be nonnegative; `std == 0` returns `mean`.
    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        assert!(std >= 0.0, "gaussian needs a nonnegative std");
        if std == 0.0 {
            return mean;
        }
        Normal::new(mean, std)
            .expect("valid normal parameters")
            .sample(&mut self.rng)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            slice.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_equal_sequences() {
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        for _ in 0..10_000 {
            assert_eq!(a.uniform_f64(0.0, 1.0), b.uniform_f64(0.0, 1.0));
            assert_eq!(a.uniform_u32(1000), b.uniform_u32(1000));
            assert_eq!(a.bernoulli(0.3), b.bernoulli(0.3));
            assert_eq!(a.gaussian(0.0, 1.0), b.gaussian(0.0, 1.0));
        }
    }

    #[test]
    fn different_seeds_diverge() {
        let mut a = RandomSource::new(1);
        let mut b = RandomSource::new(2);
        let xs: Vec<f64> = (0..16).map(|_| a.uniform_f64(0.0, 1.0)).collect();
        let ys: Vec<f64> = (0..16).map(|_| b.uniform_f64(0.0, 1.0)).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn degenerate_draws() {
        let mut r = RandomSource::new(7);
        assert_eq!(r.uniform_f64(3.0, 3.0), 3.0);
        assert!(r.bernoulli(1.0));
        assert!(!r.bernoulli(0.0));
        assert_eq!(r.gaussian(7.0, 0.0), 7.0);
    }

    #[test]
    fn derived_streams_are_independent() {
        let a: Vec<f64> = {
            let mut r = RandomSource::derived(9, 0);
            (0..8).map(|_| r.uniform_f64(0.0, 1.0)).collect()
        };
        let b: Vec<f64> = {
            let mut r = RandomSource::derived(9, 1);
            (0..8).map(|_| r.uniform_f64(0.0, 1.0)).collect()
        };
        assert_ne!(a, b);
    }

    #[test]
    fn shuffle_is_deterministic() {
        let mut a = RandomSource::new(5);
        let mut b = RandomSource::new(5);
        let mut xs: Vec<u32> = (0..100).collect();
        let mut ys: Vec<u32> = (0..100).collect();
        a.shuffle(&mut xs);
        b.shuffle(&mut ys);
        assert_eq!(xs, ys);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
    }
}
