//! Seeded synthetic degradations: additive white Gaussian noise and
//! multiplicative (speckle) noise, plus the robust sigma estimate used when
//! the noise level of a real image is unknown.
//!
//! Every sampler draws from a per-pixel SplitMix64 substream keyed by the
//! pixel index, so the noise field is independent of the image content, of
//! the traversal order and of any parallelism.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::SplitMix64;

/// A synthetic degradation, expressible on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Awgn { sigma: f64, seed: u64 },
    Speckle { looks: u32, seed: u64 },
}

impl NoiseSpec {
    pub fn apply(&self, img: &Image) -> Result<Image> {
        match *self {
            NoiseSpec::Awgn { sigma, seed } => add_awgn(img, sigma, seed),
            NoiseSpec::Speckle { looks, seed } => add_speckle(img, looks, seed),
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            NoiseSpec::Awgn { seed, .. } | NoiseSpec::Speckle { seed, .. } => seed,
        }
    }
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma`. Output pixels
/// are kept unclamped; clamping happens only at file save.
pub fn add_awgn(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument("sigma must be non-negative".into()));
    }
    let pixels = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut stream = SplitMix64::keyed(seed, i as u64);
            s + sigma * stream.gaussian()
        })
        .collect();
    img.with_pixels(pixels)
}

/// Multiplies every pixel by an i.i.d. Gamma(L, 1/L) variate (unit mean,
/// variance 1/L): the standard intensity-domain speckle model. `looks = 1`
/// is the one-look exponential case.
pub fn add_speckle(img: &Image, looks: u32, seed: u64) -> Result<Image> {
    if looks == 0 {
        return Err(Error::InvalidArgument("looks must be at least 1".into()));
    }
    let shape = looks as f64;
    let pixels = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut stream = SplitMix64::keyed(seed ^ 0x9D0C_A57E, i as u64);
            s * (sample_gamma(shape, &mut stream) / shape)
        })
        .collect();
    img.with_pixels(pixels)
}

/// Gamma(shape, 1) sampler for shape >= 1 (Marsaglia-Tsang squeeze method).
fn sample_gamma(shape: f64, rng: &mut SplitMix64) -> f64 {
    debug_assert!(shape >= 1.0);
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (3.0 * d.sqrt());
    loop {
        let x = rng.gaussian();
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u = rng.uniform_open();
        // Fast squeeze first, exact log check second.
        if u < 1.0 - 0.0331 * x.powi(4) {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Robust noise standard deviation estimate: median absolute horizontal
/// first difference scaled by 1/(0.6745 * sqrt(2)), the usual MAD estimator
/// for additive Gaussian noise.
pub fn estimate_sigma_mad(img: &Image) -> f64 {
    let (w, h) = (img.width(), img.height());
    if w < 2 {
        return 0.0;
    }
    let mut diffs: Vec<f64> = Vec::with_capacity((w - 1) * h);
    for r in 0..h {
        for c in 0..w - 1 {
            diffs.push((img.get(r, c + 1) - img.get(r, c)).abs());
        }
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = diffs[diffs.len() / 2];
    median / (0.6745 * std::f64::consts::SQRT_2)
}

/// Trigamma function psi'(x) for x > 0: recurrence below 6, asymptotic
/// series above. Used to convert speckle looks into the log-domain noise
/// standard deviation for homomorphic despeckling (var[ln v] = psi'(L)).
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 8.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        * (1.0
            + 0.5 * inv
            + inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(width: usize, height: usize, level: f64) -> Image {
        Image::new(width, height, vec![level; width * height], 255.0).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = flat(16, 16, 100.0);
        let out = add_awgn(&img, 0.0, 9).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn awgn_is_deterministic_per_seed() {
        let img = flat(32, 32, 64.0);
        let a = add_awgn(&img, 10.0, 5).unwrap();
        let b = add_awgn(&img, 10.0, 5).unwrap();
        let c = add_awgn(&img, 10.0, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn awgn_moments_at_sigma_35() {
        let img = flat(256, 256, 128.0);
        let noisy = add_awgn(&img, 35.0, 20260101).unwrap();
        let n = noisy.pixels().len() as f64;
        let mean_delta: f64 = noisy
            .pixels()
            .iter()
            .zip(img.pixels())
            .map(|(a, b)| a - b)
            .sum::<f64>()
            / n;
        let var: f64 = noisy
            .pixels()
            .iter()
            .zip(img.pixels())
            .map(|(a, b)| (a - b - mean_delta).powi(2))
            .sum::<f64>()
            / n;
        assert!(mean_delta.abs() <= 0.5, "mean {mean_delta}");
        assert!((var.sqrt() - 35.0).abs() <= 1.0, "std {}", var.sqrt());
    }

    #[test]
    fn awgn_field_independent_of_content() {
        let flat_img = flat(16, 16, 0.0);
        let mut ramp = flat(16, 16, 0.0);
        for (i, p) in ramp.pixels_mut().iter_mut().enumerate() {
            *p = i as f64;
        }
        let noise_flat = add_awgn(&flat_img, 7.0, 3).unwrap();
        let noisy_ramp = add_awgn(&ramp, 7.0, 3).unwrap();
        for i in 0..256 {
            let field_a = noise_flat.pixels()[i];
            let field_b = noisy_ramp.pixels()[i] - ramp.pixels()[i];
            assert!((field_a - field_b).abs() < 1e-12);
        }
    }

    #[test]
    fn speckle_multiplier_moments_one_look() {
        // 10^6 samples of the L=1 multiplier via a constant image of 1.0.
        let img = flat(1000, 1000, 1.0);
        let out = add_speckle(&img, 1, 77).unwrap();
        let n = out.pixels().len() as f64;
        let mean = out.pixels().iter().sum::<f64>() / n;
        let var = out.pixels().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 1.0).abs() <= 0.02, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.05, "var {var}");
    }

    #[test]
    fn speckle_on_zero_image_is_zero() {
        let img = flat(8, 8, 0.0);
        let out = add_speckle(&img, 1, 1).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn speckle_large_looks_approaches_identity() {
        let img = flat(64, 64, 200.0);
        let out = add_speckle(&img, 1_000_000, 4).unwrap();
        for (&a, &b) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() <= 0.005 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn mad_estimate_tracks_sigma() {
        // A flat image plus noise: the MAD estimator should land near sigma.
        let img = flat(128, 128, 128.0);
        let noisy = add_awgn(&img, 25.0, 12).unwrap();
        let est = estimate_sigma_mad(&noisy);
        assert!((est - 25.0).abs() <= 2.0, "estimate {est}");
    }

    #[test]
    fn trigamma_known_values() {
        // psi'(1) = pi^2/6, psi'(2) = pi^2/6 - 1.
        let pi2_6 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-10);
        assert!((trigamma(2.0) - (pi2_6 - 1.0)).abs() < 1e-10);
    }
}
