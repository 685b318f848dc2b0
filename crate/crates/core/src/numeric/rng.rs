//! Deterministic verifier-side randomness.

use sha2::{Digest, Sha256};

use super::{Real, Vector};

/// Counter-mode PRNG: block `i` is `SHA-256(seed ‖ i_le)`, read as four
/// little-endian `u64` words.
///
/// Identical seeds give identical streams on every platform. Not intended as
/// a cryptographic generator.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: [u8; 32],
    counter: u64,
    block: [u64; 4],
    used: usize,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: [u8; 32]) -> Self {
        Self {
            seed,
            counter: 0,
            block: [0; 4],
            used: 4,
            spare_normal: None,
        }
    }

    /// Seed whose first eight bytes are `seed` in little-endian order.
    pub fn from_u64(seed: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        Self::new(bytes)
    }

    /// Independent stream derived from this seed and a label.
    pub fn fork(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(label.as_bytes());
        Self::new(h.finalize().into())
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    fn refill(&mut self) {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(self.counter.to_le_bytes());
        let out = h.finalize();
        for (word, chunk) in self.block.iter_mut().zip(out.chunks_exact(8)) {
            *word = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        self.counter += 1;
        self.used = 0;
    }

    pub fn next_u64(&mut self) -> u64 {
        if self.used == self.block.len() {
            self.refill();
        }
        let w = self.block[self.used];
        self.used += 1;
        w
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, bound)` without modulo bias.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Uniform integer on the inclusive range `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "empty range");
        let span = (hi as i128 - lo as i128 + 1) as u128;
        if span > u64::MAX as u128 {
            return self.next_u64() as i64;
        }
        (lo as i128 + self.below(span as u64) as i128) as i64
    }

    /// One standard-normal variate (Box–Muller, both outputs used).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// `d` independent standard-normal variates. Verifier-side, untraced.
pub fn sample_standard_normal<T: Real>(rng: &mut SeededRng, d: usize) -> Vector<T> {
    assert!(d >= 1, "dimension must be positive");
    Vector::from_trusted((0..d).map(|_| T::lit(rng.standard_normal())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::from_u64(7);
        let mut b = SeededRng::from_u64(7);
        let va: Vector<f64> = sample_standard_normal(&mut a, 2);
        let vb: Vector<f64> = sample_standard_normal(&mut b, 2);
        assert_eq!(va, vb);
        let mut c = SeededRng::from_u64(8);
        assert_ne!(va, sample_standard_normal::<f64>(&mut c, 2));
    }

    #[test]
    fn uniform_ranges() {
        let mut rng = SeededRng::from_u64(1);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
            let k = rng.int_inclusive(-3, 3);
            assert!((-3..=3).contains(&k));
        }
        assert_eq!(rng.int_inclusive(5, 5), 5);
    }

    #[test]
    fn fork_is_independent_and_stable() {
        let root = SeededRng::from_u64(3);
        let mut a = root.fork("a");
        let mut a2 = root.fork("a");
        let mut b = root.fork("b");
        let x = a.next_u64();
        assert_eq!(x, a2.next_u64());
        assert_ne!(x, b.next_u64());
    }

    #[test]
    fn normal_moments() {
        let mut rng = SeededRng::from_u64(2024);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "variance {var}");
    }
}
