//! Seeded random number generation.
//!
//! Every stochastic operation in this crate draws from a [`SeededRng`], a
//! ChaCha8 stream cipher generator. The algorithm id is recorded in run
//! metadata so results can be replayed: identical (seed, algorithm) pairs
//! produce identical streams.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FaeError, Result};
use crate::matrix::Matrix;

/// Identifier of the generator algorithm, stored in metadata sidecars.
pub const RNG_ALGORITHM: &str = "chacha8";

/// A seeded, reproducible random number generator.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform01(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw on `[lo, hi)`. The caller validates `lo < hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Standard normal draw scaled by `std`.
    pub fn normal(&mut self, std: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        z * std
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.inner.random_range(0..=i);
            items.swap(i, j);
        }
    }

    /// Derives an independent generator for a numbered substream (per-tree
    /// seeds, batch shuffling). SplitMix64 on (seed, stream) keeps the
    /// derivation platform-independent.
    pub fn derive(&self, stream: u64) -> SeededRng {
        let mixed = splitmix64(
            self.seed ^ splitmix64(stream.wrapping_add(0x9E3779B97F4A7C15)),
        );
        SeededRng::new(mixed)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Xavier (Glorot) normal initialization: i.i.d. entries with mean 0 and
/// standard deviation `sqrt(2 / (rows + cols))`.
pub fn xavier_normal(rows: usize, cols: usize, rng: &mut SeededRng) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(FaeError::InvalidArgument(format!(
            "xavier_normal needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let std = (2.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.normal(std)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// I.i.d. uniform draws on `[lo, hi)`.
pub fn uniform_init(len: usize, lo: f64, hi: f64, rng: &mut SeededRng) -> Result<Vec<f64>> {
    if !(lo < hi) {
        return Err(FaeError::InvalidArgument(format!(
            "uniform_init requires lo < hi, got [{lo}, {hi})"
        )));
    }
    Ok((0..len).map(|_| rng.uniform(lo, hi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_produce_identical_streams() {
        let mut a = SeededRng::new(123);
        let mut b = SeededRng::new(123);
        for _ in 0..100 {
            assert_eq!(a.uniform01().to_bits(), b.uniform01().to_bits());
        }
        let na: Vec<u64> = (0..50).map(|_| a.normal(1.0).to_bits()).collect();
        let nb: Vec<u64> = (0..50).map(|_| b.normal(1.0).to_bits()).collect();
        assert_eq!(na, nb);
    }

    #[test]
    fn derived_streams_differ_from_parent_and_each_other() {
        let base = SeededRng::new(7);
        let mut s0 = base.derive(0);
        let mut s1 = base.derive(1);
        let a: Vec<u64> = (0..8).map(|_| s0.uniform01().to_bits()).collect();
        let b: Vec<u64> = (0..8).map(|_| s1.uniform01().to_bits()).collect();
        assert_ne!(a, b);
        // Re-deriving gives the same stream.
        let mut s0_again = base.derive(0);
        let c: Vec<u64> = (0..8).map(|_| s0_again.uniform01().to_bits()).collect();
        assert_eq!(a, c);
    }

    #[test]
    fn xavier_std_formula() {
        // (1,1) -> std sqrt(2/2) = 1; (784,50) -> sqrt(2/834).
        assert!(((2.0f64 / 2.0).sqrt() - 1.0).abs() < 1e-15);
        let expected = (2.0f64 / 834.0).sqrt();
        assert!((expected - 0.04898).abs() < 1e-4);
    }

    #[test]
    fn xavier_empirical_std_matches_formula() {
        // Monte-Carlo estimate over 1e5 entries at (100,100): std sqrt(1/100).
        let mut rng = SeededRng::new(99);
        let m = xavier_normal(100, 100, &mut rng).unwrap();
        let n = m.data().len() as f64;
        let mean: f64 = m.data().iter().sum::<f64>() / n;
        let var: f64 = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let expected = 0.1;
        assert!(
            (std - expected).abs() / expected < 0.02,
            "empirical std {std} vs expected {expected}"
        );
    }

    #[test]
    fn uniform_init_respects_bounds() {
        let mut rng = SeededRng::new(3);
        // The feature-scoring layer's init interval.
        let v = uniform_init(10_000, 0.999999, 0.9999999, &mut rng).unwrap();
        assert!(v.iter().all(|&x| (0.999999..0.9999999).contains(&x)));
    }

    #[test]
    fn uniform_init_rejects_degenerate_interval() {
        let mut rng = SeededRng::new(3);
        assert!(uniform_init(4, 1.0, 1.0, &mut rng).is_err());
        assert!(uniform_init(4, 2.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn uniform_mean_is_centered() {
        let mut rng = SeededRng::new(17);
        let v = uniform_init(10_000, 0.0, 1.0, &mut rng).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }
}
