//! Counter-based deterministic random streams.
//!
//! One experiment seed fans out into independent named streams (data
//! generation, parameter init, shuffling, ...) that produce identical
//! sequences on every platform: the generator is pure 64-bit integer
//! mixing with no floating-point or OS state involved.

use crate::hash::fnv1a64;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; the core mixing function for the whole generator.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    key: u64,
    counter: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            key: mix(seed ^ GOLDEN),
            counter: 0,
        }
    }

    /// Independent stream identified by a label; does not advance `self`.
    pub fn stream(&self, label: &str) -> Self {
        RngState {
            key: mix(self.key ^ fnv1a64(label.as_bytes())),
            counter: 0,
        }
    }

    /// Independent stream identified by an index; does not advance `self`.
    pub fn substream(&self, index: u64) -> Self {
        RngState {
            key: mix(self.key ^ mix(index.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter += 1;
        mix(self.key.wrapping_add(c.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Lemire multiply-shift; n must be > 0.
    pub fn range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn lowercase_letter(&mut self) -> char {
        (b'a' + self.range(26) as u8) as char
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.range(i + 1);
            xs.swap(i, j);
        }
    }
}

/// One u64 derived from (seed, label, index); used to hand sub-seeds to
/// nested components that own their own streams.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    RngState::new(seed)
        .stream(label)
        .substream(index)
        .next_u64()
}
