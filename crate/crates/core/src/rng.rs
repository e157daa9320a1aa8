//! Seeded random streams shared by every stochastic step of the simulator.
//!
//! The generator is xoshiro256** (Blackman & Vigna). A 64-bit seed is expanded
//! to the 256-bit state by taking four consecutive SplitMix64 outputs, which are
//! used as the state words `s[0..4]` in order. All derived draws are defined on
//! top of `next_u64` so another implementation can reproduce them exactly:
//!
//! * `unit_f64`: `(next_u64 >> 11) as f64 * 2^-53`, a value in `[0, 1)`.
//! * `uniform(lo, hi)`: `lo + (hi - lo) * unit_f64()`.
//! * `below(n)`: Lemire's multiply-shift with rejection. Draw `x = next_u64`,
//!   form the 128-bit product `x * n`; reject while the low 64 bits are below
//!   `(2^64 - n) mod n`; return the high 64 bits.
//! * `shuffle`: Fisher-Yates walking `i` from `len - 1` down to `1`, swapping
//!   `i` with `below(i + 1)`.
//!
//! Independent streams are keyed with [`derive_seed`], which folds a list of
//! tags into a base seed with the SplitMix64 finalizer:
//! `h = base; for t in tags { h = mix(h ^ mix(t + 0x9E3779B97F4A7C15)) }`.
//!
//! Test vectors (first outputs of `SeededRng::new(0).next_u64()`):
//! `0x99EC5F36CB75F2B4`, `0xBF6E1F784956452A`, `0x1A5F849D4933E6E0`.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for a named sub-stream.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(base, |h, &t| mix64(h ^ mix64(t.wrapping_add(GOLDEN_GAMMA))))
}

/// Stream tags, so different consumers of one base seed never collide.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const SAMPLING: u64 = 3;
    pub const LOCAL_SHUFFLE: u64 = 4;
    pub const FAULTS: u64 = 5;
    pub const TRIAL: u64 = 6;
    pub const CROSS_VALIDATION: u64 = 7;
    pub const SYNTHETIC: u64 = 8;
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256StarStar,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    pub fn derived(base: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed(base, tags))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn below_usize(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit_f64() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below_usize(i + 1);
            items.swap(i, j);
        }
    }

    /// A random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}
