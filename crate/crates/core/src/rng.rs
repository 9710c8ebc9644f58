//! Named, independently seeded random streams.
//!
//! Each consumer of randomness gets its own stream keyed by
//! `(master_seed, name)`, so adding a new consumer never shifts the draws of
//! an existing one.

use alloc::string::String;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::time::SimDuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RngError {
    #[error("exponential mean must be positive")]
    InvalidMean,
}

pub struct RngStream {
    name: String,
    rng: ChaCha8Rng,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, name: &str) -> Self {
        let mut state = master_seed ^ fnv1a(name.as_bytes()).rotate_left(17);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        RngStream { name: String::from(name), rng: ChaCha8Rng::from_seed(seed) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in `(0, 1]`.
    pub fn uniform_open_closed(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Uniform integer in `[0, upper]`.
    pub fn uniform_inclusive(&mut self, upper: u64) -> u64 {
        self.rng.random_range(0..=upper)
    }

    /// Uniform index in `[0, len)`; `len` must be non-zero.
    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.uniform() < p
        }
    }

    /// Exponential draw by inverse transform, rounded to whole microseconds.
    pub fn exp_sample(&mut self, mean: SimDuration) -> Result<SimDuration, RngError> {
        let u = self.uniform_open_closed();
        exp_from_uniform(u, mean)
    }
}

/// `-mean * ln(u)` for `u` in `(0, 1]`, rounded to the nearest microsecond.
pub fn exp_from_uniform(u: f64, mean: SimDuration) -> Result<SimDuration, RngError> {
    if mean.is_zero() {
        return Err(RngError::InvalidMean);
    }
    debug_assert!(u > 0.0 && u <= 1.0);
    let x = -(mean.as_micros() as f64) * libm::log(u);
    Ok(SimDuration::from_micros(libm::round(x.max(0.0)) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(42, "call-arrivals");
        let mut b = RngStream::new(42, "call-arrivals");
        let xs: Vec<u64> = (0..100).map(|_| a.uniform_inclusive(1 << 40)).collect();
        let ys: Vec<u64> = (0..100).map(|_| b.uniform_inclusive(1 << 40)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_are_independent() {
        let mut a = RngStream::new(42, "call-arrivals");
        let mut b = RngStream::new(42, "wifi-backoff");
        let xs: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        assert_ne!(xs, ys);

        // Drawing heavily on one stream does not move another.
        let mut c1 = RngStream::new(7, "cloud-jitter");
        let first: Vec<f64> = (0..5).map(|_| c1.uniform()).collect();
        let mut noisy = RngStream::new(7, "umts-bler");
        for _ in 0..1000 {
            noisy.uniform();
        }
        let mut c2 = RngStream::new(7, "cloud-jitter");
        let again: Vec<f64> = (0..5).map(|_| c2.uniform()).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn forced_unit_uniform_gives_zero() {
        assert_eq!(exp_from_uniform(1.0, SimDuration::from_secs(180)).unwrap(), SimDuration::ZERO);
    }

    #[test]
    fn zero_mean_is_rejected() {
        let mut s = RngStream::new(1, "x");
        assert_eq!(s.exp_sample(SimDuration::ZERO), Err(RngError::InvalidMean));
    }

    #[test]
    fn uniform_open_closed_never_zero() {
        let mut s = RngStream::new(3, "u");
        assert!((0..100_000).all(|_| {
            let u = s.uniform_open_closed();
            u > 0.0 && u <= 1.0
        }));
    }
}
