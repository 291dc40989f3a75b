//! Deterministic pseudo-random generation.
//!
//! Everything random in the crate goes through SplitMix64 so that a run is a
//! pure function of its seeds, on every platform. Noise fields additionally
//! use one decorrelated substream per pixel (counter-based keying), which
//! makes parallel generation produce the same field as sequential
//! generation.

/// SplitMix64 (Steele, Lea, Flood 2014): 64-bit state advanced by the golden
/// gamma, output mixed by the murmur-style finalizer below.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    /// Substream for counter `index`: the stream state is keyed by the mixed
    /// seed xor the mixed counter, so streams for distinct indices are
    /// decorrelated and independent of generation order.
    pub fn keyed(seed: u64, index: u64) -> SplitMix64 {
        SplitMix64 {
            state: mix(seed.wrapping_add(GOLDEN_GAMMA))
                ^ mix(index.wrapping_mul(GOLDEN_GAMMA) ^ 0x6A09_E667_F3BC_C909),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe as a logarithm argument.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard Gaussian via Box-Muller, cosine branch.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, bound)` by rejection-free scaling (bound is
    /// tiny compared to 2^64, so modulo bias is irrelevant here), used for
    /// seeded shuffles.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (self.next_u64() % bound as u64) as usize
    }
}
