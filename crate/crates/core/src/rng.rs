//! Counter-based random streams.
//!
//! Every random number used by a simulation is a pure function of a
//! hierarchical key (master seed, path index, continuation index, ...) and
//! the step index at which it is consumed. Paths can therefore be executed
//! in any order, on any number of threads, and a continuation can be forked
//! off a frozen prefix without disturbing the prefix's own stream.
//!
//! The mixing function is the SplitMix64 finalizer; a stream at a given
//! counter position emits `mix(key + counter * GOLDEN)`, which is exactly
//! SplitMix64 started from `key`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifier of one independent stream of random numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x5EED_0F_0B_A77E_4C5D))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Derive the key of the `index`-th sub-stream.
    pub fn child(self, index: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN))))
    }

    /// Per-step generator. Step 0 is reserved for quantities drawn at time
    /// zero (the barriers); draws for the transition to time `n` use step `n`.
    #[inline]
    pub fn at_step(self, step: u64) -> CounterRng {
        CounterRng {
            key: mix64(self.0.wrapping_add(step.wrapping_mul(0xD1B5_4A32_D192_ED03))),
            counter: 0,
        }
    }

    /// Seed used for the `index`-th path of an ensemble built on `master`.
    pub fn path_seed(master: u64, index: u64) -> u64 {
        StreamKey::new(master).child(index).raw()
    }
}

/// A short-lived generator whose `k`-th output is a fixed function of
/// `(key, k)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
