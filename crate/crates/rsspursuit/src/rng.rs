//! Portable deterministic pseudo-random generation.
//!
//! Everything that needs randomness in this crate (shift sequences, Monte
//! Carlo trials, synthetic test signals) goes through the generators defined
//! here rather than a platform RNG, so that a `(seed, stream)` pair produces
//! the same values on every machine. The generator is xoshiro256**,
//! implemented from its published constants; states are derived from a seed
//! and a stream key with SplitMix64.

/// SplitMix64 step. Returns the next output and advances the state.
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Mixes a seed with up to three stream-key words into a single 64-bit value.
///
/// Used to derive independent substreams for (iteration-block, scale) pairs
/// and for Monte Carlo trial indexes. Each word is absorbed through a full
/// SplitMix64 round so nearby keys map to unrelated states.
pub fn mix_key(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut s = seed;
    let mut acc = splitmix64(&mut s);
    s ^= a.wrapping_mul(0xA24BAED4963EE407);
    acc ^= splitmix64(&mut s);
    s ^= b.wrapping_mul(0x9FB21C651E98DF25);
    acc ^= splitmix64(&mut s);
    s ^= c.wrapping_mul(0xD6E8FEB86659FD93);
    acc ^ splitmix64(&mut s)
}

/// xoshiro256** generator (Blackman & Vigna), seeded via SplitMix64.
#[derive(Debug, Clone)]
pub struct Xoshiro256 {
    s: [u64; 4],
}

impl Xoshiro256 {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Xoshiro256 { s }
    }

    /// Generator for an independent substream of `seed` keyed by (a, b, c).
    pub fn substream(seed: u64, a: u64, b: u64, c: u64) -> Self {
        Self::new(mix_key(seed, a, b, c))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1]
            .wrapping_mul(5)
            .rotate_left(7)
            .wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform integer in `[0, bound)`. `bound` must be positive.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Rejection sampling to avoid modulo bias.
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform f64 in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate (Box-Muller, one value per call pair cached).
    pub fn next_normal(&mut self) -> f64 {
        // Draw until u is nonzero so the log is finite.
        loop {
            let u = self.next_f64();
            if u > 0.0 {
                let v = self.next_f64();
                let r = (-2.0 * u.ln()).sqrt();
                return r * (2.0 * std::f64::consts::PI * v).cos();
            }
        }
    }

    /// Exponential deviate with mean `mu`.
    pub fn next_exponential(&mut self, mu: f64) -> f64 {
        loop {
            let u = self.next_f64();
            if u > 0.0 {
                return -mu * u.ln();
            }
        }
    }
}
