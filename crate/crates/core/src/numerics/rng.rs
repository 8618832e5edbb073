//! Seeded random streams with labeled forking.
//!
//! Every random draw in the system comes from an [`RngStream`]. A stream is
//! identified by a 64-bit seed; [`RngStream::fork`] derives a child stream
//! from the parent's *seed* and a label only — never from the parent's draw
//! position — so the same (seed, label) path always yields the same stream
//! regardless of call order. Distribution helpers are implemented directly on
//! the raw 64-bit output to keep emitted values stable across dependency
//! upgrades.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

// splitmix64 finalizer: strong avalanche for seed derivation.
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    engine: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            engine: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The seed this stream was created with (its identity, not its position).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child stream. Same parent seed + same label →
    /// same child, even if the parent has produced draws in between.
    pub fn fork(&self, label: &str) -> RngStream {
        let child = mix64(self.seed ^ mix64(fnv1a(label.as_bytes())));
        RngStream::new(child)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.engine.next_u64()
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// A single fair bit.
    pub fn bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }

    /// True with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform01() < p
    }

    /// Unbiased integer in [0, n). Panics if n == 0.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() requires a non-empty range");
        let bound = n as u64;
        // Reject the low remainder zone so every residue is equally likely.
        let cutoff = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= cutoff {
                return (x % bound) as usize;
            }
        }
    }

    /// `k` distinct values from 0..n in draw order (partial Fisher-Yates).
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} distinct values from 0..{n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
