//! Deterministic random streams.
//!
//! Every random decision in the crate (shuffles, fold assignment, Extra-Trees
//! feature and threshold draws) is driven by ChaCha8 as implemented by the
//! `rand_chacha` crate. A stream is identified by `(seed, stream)`: the 256-bit
//! key is the little-endian bytes of `seed` followed by 24 zero bytes, and
//! `stream` selects the ChaCha stream id. Bounded integers use rejection
//! sampling on `next_u64` and floats take the top 53 bits, so the sequence of
//! values depends only on the ChaCha8 keystream and not on any `rand`
//! distribution implementation.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream ids reserved for distinct purposes so they never overlap.
pub mod streams {
    pub const SHUFFLE: u64 = 0;
    pub const KFOLD: u64 = 1;
    /// Extra-Trees tree `i` uses `EXTRA_TREES_BASE + i`.
    pub const EXTRA_TREES_BASE: u64 = 1 << 32;
}

#[derive(Debug, Clone)]
pub struct DetRng {
    inner: ChaCha8Rng,
}

impl DetRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        // Reject the top partial block so every residue is equally likely.
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    /// Uniform float in `[0, 1)`.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// In-place Fisher-Yates shuffle (Durstenfeld form, walking downward).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}
