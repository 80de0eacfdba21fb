//! Counter-based noise source.
//!
//! All randomness in the crate (channel noise, quantization noise, parameter
//! initialization, dataset generation, batch shuffling) flows through
//! [`NoiseSource`] so that a run is fully determined by its seeds.
//!
//! The generator is counter-based: draw `i` of stream `(seed, stream)` is
//!
//! ```text
//! base    = mix64(mix64(seed) ^ stream)
//! word(i) = mix64(base + i * 0x9E3779B97F4A7C15)     (wrapping arithmetic)
//! ```
//!
//! with `mix64` the SplitMix64 finalizer. Uniform doubles take the top 53
//! bits of a word; Gaussians come from a Box–Muller transform of two
//! consecutive uniforms. The same `(seed, stream)` always yields the same
//! sequence, independent of threading or call-site interleaving elsewhere.
//! Bit-exactness across languages is not required by the evaluation
//! protocol, but this exact algorithm is documented so the statistics can
//! be reproduced.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream of uniform and Gaussian variates.
///
/// Cloning a source duplicates its position; two clones produce identical
/// continuations. Use [`NoiseSource::substream`] to derive statistically
/// independent child streams.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    base: u64,
    counter: u64,
    cached_normal: Option<f64>,
}

impl NoiseSource {
    /// Source identified by `(seed, stream)`.
    pub fn new(seed: u64, stream: u64) -> Self {
        NoiseSource {
            base: mix64(mix64(seed) ^ stream),
            counter: 0,
            cached_normal: None,
        }
    }

    /// Derives an independent child stream; children with distinct tags do
    /// not overlap with each other or the parent.
    pub fn substream(&self, tag: u64) -> Self {
        NoiseSource {
            base: mix64(self.base ^ mix64(tag)),
            counter: 0,
            cached_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.base.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1/2, 1/2)`, the additive quantization-noise law.
    #[inline]
    pub fn uniform_centered(&mut self) -> f64 {
        self.uniform01() - 0.5
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Standard normal via Box–Muller; pairs are drawn from two consecutive
    /// uniforms and the second member is cached.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0, 1] so ln(u1) is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Normal with mean 0 and the given variance.
    #[inline]
    pub fn normal(&mut self, variance: f64) -> f64 {
        self.standard_normal() * variance.sqrt()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is negligible for the n used here (dataset sizes).
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
