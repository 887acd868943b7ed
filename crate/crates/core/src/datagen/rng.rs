//! Reproducible random streams.
//!
//! Algorithm (version 1, fixed so other implementations can reproduce outputs):
//!
//! * Generator: PCG64 in its XSL-RR 128/64 form (`rand_pcg::Lcg128Xsl64`).
//! * Seeding: a `u64` seed drives SplitMix64; four consecutive outputs
//!   `a, b, c, d` give `state = a << 64 | b` and `stream = c << 64 | d`.
//! * Uniform in [0, 1): `(next_u64 >> 11) * 2^-53`.
//! * Integer in [0, n): Lemire's multiply-shift with rejection.
//! * Standard normal: Box–Muller on `u1 = 1 - uniform`, `u2 = uniform`,
//!   returning `r cos θ` first and caching `r sin θ` for the next call.
//! * Bernoulli(p): `uniform < p`.
//! * Child seeds: `derive_seed(master, i)` is the SplitMix64 finalizer applied to
//!   `master + (i + 1) * 0x9E3779B97F4A7C15` (wrapping).

use rand_core::Rng;
use rand_pcg::Lcg128Xsl64;

pub const RNG_NAME: &str = "pcg64-xsl-rr/splitmix64-seeding/v1";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GOLDEN);
        splitmix_finalize(self.0)
    }
}

/// Seed for the `index`-th independent repetition under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix_finalize(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub struct SeededRng {
    inner: Lcg128Xsl64,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        let mut sm = SplitMix64(seed);
        let mut wide = || ((sm.next() as u128) << 64) | sm.next() as u128;
        let state = wide();
        let stream = wide();
        Self {
            inner: Lcg128Xsl64::new(state, stream),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fisher–Yates shuffle, iterating from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(SeededRng::new(7).next_u64(), SeededRng::new(8).next_u64());
    }

    #[test]
    fn splitmix_reference_values() {
        // published SplitMix64 outputs for seed 0
        let mut sm = SplitMix64(0);
        assert_eq!(sm.next(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(sm.next(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn uniform_in_unit_interval_and_below_in_range() {
        let mut r = SeededRng::new(1);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn below_is_roughly_uniform() {
        let mut r = SeededRng::new(3);
        let mut counts = [0usize; 5];
        for _ in 0..50_000 {
            counts[r.below(5) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = SeededRng::new(11);
        let xs: Vec<f64> = (0..100_000).map(|_| r.normal(2.0, 3.0)).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((m - 2.0).abs() < 0.05);
        assert!((v.sqrt() - 3.0).abs() < 0.05);
    }

    #[test]
    fn derived_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
