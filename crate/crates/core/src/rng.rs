//! Counter-based random number generation.
//!
//! Every random draw in the crate comes from a [`CounterRng`] stream whose
//! key is derived by stable hashing from a master seed, a purpose tag, and
//! integer indices (path index, cell index, ...). Streams are pure functions
//! of their key, so thread scheduling and worker count can never change a
//! result, and any sub-computation can be replayed in isolation.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a fast, well-distributed 64-bit mixing function.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a sequence of words (tags, indices).
///
/// The derivation folds each word through [`mix`] with a position-dependent
/// offset, so permuting or truncating the word list yields unrelated seeds.
pub fn derive(seed: u64, words: &[u64]) -> u64 {
    let mut state = mix(seed ^ GOLDEN);
    for (i, &w) in words.iter().enumerate() {
        let salted = w.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1));
        state = mix(state ^ mix(salted));
    }
    state
}

/// Purpose tags keeping unrelated seed derivations in disjoint streams.
pub mod tag {
    pub const ENV: u64 = 0x01;
    pub const PATH: u64 = 0x02;
    pub const OFFSET: u64 = 0x03;
    pub const MARKS: u64 = 0x04;
    pub const RERANDOMIZE: u64 = 0x05;
    pub const SCAN: u64 = 0x06;
    pub const MARGIN: u64 = 0x07;
    pub const PERMUTATION: u64 = 0x08;
    pub const FIT: u64 = 0x09;
    pub const COMPARE: u64 = 0x0a;
    pub const REGULARITY: u64 = 0x0b;
}

/// Counter-based generator: `next_u64` is `splitmix64` of a per-stream key
/// plus a Weyl-sequence counter. Cloning and re-keying are O(1); two streams
/// with different keys are independent for Monte Carlo purposes.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    /// Stream for a derived purpose, e.g. `CounterRng::derived(seed, &[tag::PATH, k])`.
    pub fn derived(seed: u64, words: &[u64]) -> Self {
        CounterRng::new(derive(seed, words))
    }

    #[inline]
    pub fn next(&mut self) -> u64 {
        let z = self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN));
        self.counter += 1;
        mix(z)
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[-1, 1]`.
    #[inline]
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    /// Standard normal via `rand_distr`'s ziggurat.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        rand::Rng::sample(self, rand_distr::StandardNormal)
    }

    /// Uniform point in the closed unit ball of dimension `dim`
    /// (rejection from the cube; consumes a deterministic stream).
    pub fn in_unit_ball(&mut self, dim: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), dim);
        loop {
            let mut norm2 = 0.0;
            for o in out.iter_mut() {
                *o = self.symmetric();
                norm2 += *o * *o;
            }
            if norm2 <= 1.0 {
                return;
            }
        }
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        let mut chunks = dest.chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&self.next().to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let bytes = self.next().to_le_bytes();
            rem.copy_from_slice(&bytes[..rem.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
