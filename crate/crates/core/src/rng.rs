//! Counter-based random numbers.
//!
//! A draw is a pure function of `(seed, step, stream, counter)`, so cells and
//! batch members can be sampled in any order or in parallel and still produce
//! identical results. The mixing function is a chain of SplitMix64 finalizers,
//! one per key word, each word pre-multiplied by a distinct odd constant.

/// Identifies one stream of random draws at one simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngKey {
    pub seed: u64,
    pub step: u64,
    pub stream: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STEP_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const STREAM_MUL: u64 = 0xAEF1_7502_108E_F2D9;
const COUNTER_MUL: u64 = 0xF135_7AEA_2E62_A9C5;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngKey {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            step: 0,
            stream: 0,
        }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn with_step(self, step: u64) -> Self {
        Self { step, ..self }
    }

    /// Key for `offset` steps after this one.
    pub fn advance(self, offset: u64) -> Self {
        Self {
            step: self.step.wrapping_add(offset),
            ..self
        }
    }

    /// Hash of the key words, shared by all counters of this key.
    #[inline]
    fn base(&self) -> u64 {
        let h = mix64(self.seed.wrapping_add(GOLDEN));
        let h = mix64(h ^ self.step.wrapping_mul(STEP_MUL));
        mix64(h ^ self.stream.wrapping_mul(STREAM_MUL))
    }

    /// The 64-bit draw at `counter`.
    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        draw_bits(self.base(), counter)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        to_unit(self.bits(counter))
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&self, counter: u64, n: u64) -> u64 {
        assert!(n > 0, "range must be nonempty");
        // multiply-shift; bias is at most n / 2^64
        ((self.bits(counter) as u128 * n as u128) >> 64) as u64
    }

    /// A sampler with the key hash precomputed, for many draws from one key.
    pub fn sampler(&self) -> Sampler {
        Sampler { base: self.base() }
    }
}

/// Draws for a fixed key. Produces the same values as [`RngKey::uniform`].
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    base: u64,
}

impl Sampler {
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        to_unit(draw_bits(self.base, counter))
    }
}

#[inline]
fn draw_bits(base: u64, counter: u64) -> u64 {
    mix64(base ^ counter.wrapping_add(1).wrapping_mul(COUNTER_MUL))
}

#[inline]
fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_pure_functions_of_the_key() {
        let k = RngKey {
            seed: 42,
            step: 7,
            stream: 3,
        };
        let a: Vec<f64> = (0..100).map(|i| k.uniform(i)).collect();
        let b: Vec<f64> = (0..100).rev().map(|i| k.uniform(i)).rev().collect();
        assert_eq!(a, b);
        let s = k.sampler();
        for i in 0..100 {
            assert_eq!(s.uniform(i), a[i as usize]);
        }
    }

    #[test]
    fn key_words_change_the_output() {
        let k = RngKey::new(1);
        let x = k.bits(0);
        assert_ne!(x, k.with_step(1).bits(0));
        assert_ne!(x, k.with_stream(1).bits(0));
        assert_ne!(x, RngKey::new(2).bits(0));
        assert_ne!(x, k.bits(1));
        // swapping step and stream must not collide
        let a = RngKey { seed: 0, step: 1, stream: 2 };
        let b = RngKey { seed: 0, step: 2, stream: 1 };
        assert_ne!(a.bits(0), b.bits(0));
    }

    #[test]
    fn uniform_sanity() {
        // mean, variance and a 16-bin chi-square over consecutive counters and streams
        let n = 200_000u64;
        let mut bins = [0u64; 16];
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let k = RngKey { seed: 9, step: i % 7, stream: i % 13 };
            let u = k.uniform(i / 91);
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sum_sq += u * u;
            bins[(u * 16.0) as usize] += 1;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 2e-3);
        let expected = n as f64 / 16.0;
        let chi2: f64 = bins
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        // 15 dof, p = 0.001 critical value is 37.7
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn adjacent_counters_are_uncorrelated() {
        let k = RngKey::new(123);
        let n = 100_000;
        let xs: Vec<f64> = (0..=n).map(|i| k.uniform(i) - 0.5).collect();
        let cov: f64 = xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        let corr = cov * 12.0;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");
    }

    #[test]
    fn below_is_in_range() {
        let k = RngKey::new(5);
        let mut seen = [false; 10];
        for i in 0..1000 {
            let x = k.below(i, 10);
            assert!(x < 10);
            seen[x as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
