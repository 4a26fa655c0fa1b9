//! Seeded random streams.
//!
//! Every independent unit of work (a restart, a trial, a probe direction) draws from its
//! own ChaCha stream keyed by `(seed, unit)`, so results never depend on the order in which
//! units are scheduled.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic random stream for one unit of work.
#[derive(Clone, Debug)]
pub struct Stream {
    inner: ChaCha12Rng,
}

impl Stream {
    pub fn new(seed: u64, unit: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(unit);
        Self { inner }
    }

    /// Sub-stream for a labelled purpose inside one unit (e.g. "init" vs "sampling").
    pub fn derive(seed: u64, unit: u64, purpose: u64) -> Self {
        Self::new(mix64(seed ^ mix64(purpose.wrapping_add(0x9e37_79b9_7f4a_7c15))), unit)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`; `bound` must be positive.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Lemire's multiply-shift with rejection.
        let mut m = (self.next_u64() as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = (self.next_u64() as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Standard exponential variate.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -crate::math::ln(1.0 - self.uniform())
    }

    /// Standard normal variate (Box-Muller, one of the pair).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        crate::math::sqrt(-2.0 * crate::math::ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Draw an index from unnormalized non-negative weights. Returns `None` if all are zero.
    pub fn categorical(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut u = self.uniform() * total;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last = Some(i);
                if u < w {
                    return Some(i);
                }
                u -= w;
            }
        }
        last
    }

    /// Uniform point on the probability simplex of the given dimension.
    pub fn simplex(&mut self, dim: usize) -> alloc::vec::Vec<f64> {
        let mut v: alloc::vec::Vec<f64> = (0..dim).map(|_| self.exponential()).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    }
}

/// SplitMix64 finalizer.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
