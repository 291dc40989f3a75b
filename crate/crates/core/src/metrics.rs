//! PSNR and SSIM between a reference image and a processed image.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::Image;

/// SSIM windowing: one statistic over the whole image, or the mean of the
/// statistic over all 8x8 windows at stride 1 (the default for reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimWindow {
    Global,
    Sliding8x8,
}

/// Quality metrics for one (reference, test) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(
        serialize_with = "serialize_psnr",
        deserialize_with = "deserialize_psnr"
    )]
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
}

fn serialize_psnr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

fn deserialize_psnr<'de, D>(d: D) -> std::result::Result<f64, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrInf {
        Num(f64),
        Text(String),
    }
    match NumOrInf::deserialize(d)? {
        NumOrInf::Num(v) => Ok(v),
        NumOrInf::Text(t) if t == "inf" => Ok(f64::INFINITY),
        NumOrInf::Text(t) => Err(serde::de::Error::custom(format!("bad psnr value {t:?}"))),
    }
}

fn check_dims(reference: &Image, test: &Image) -> Result<()> {
    if reference.width() != test.width() || reference.height() != test.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} against {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    Ok(())
}

/// Mean squared error over all pixels.
pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    check_dims(reference, test)?;
    let n = reference.pixels().len() as f64;
    Ok(reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in decibels:
/// `20 log10(max(reference)) - 10 log10(MSE)`, `+inf` when MSE is zero.
///
/// The peak is the maximum of the reference image, not a nominal dynamic
/// range.
pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = reference
        .pixels()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    Ok(20.0 * peak.log10() - 10.0 * mse.log10())
}

/// Structural similarity with the standard stabilizers
/// `c1 = (0.01 * range)^2`, `c2 = (0.03 * range)^2` where `range` is the
/// reference image's `max_value`. Population moments throughout.
pub fn ssim(reference: &Image, test: &Image, window: SsimWindow) -> Result<f64> {
    check_dims(reference, test)?;
    let range = reference.max_value();
    let c1 = (0.01 * range) * (0.01 * range);
    let c2 = (0.03 * range) * (0.03 * range);

    match window {
        SsimWindow::Global => Ok(ssim_statistic(reference.pixels(), test.pixels(), c1, c2)),
        SsimWindow::Sliding8x8 => {
            let side = 8usize;
            let (w, h) = (reference.width(), reference.height());
            if w < side || h < side {
                return Err(Error::InvalidArgument(format!(
                    "sliding SSIM needs at least {side}x{side}, got {w}x{h}"
                )));
            }
            let mut sum = 0.0;
            let mut count = 0usize;
            let mut wa = vec![0.0; side * side];
            let mut wb = vec![0.0; side * side];
            for r0 in 0..=(h - side) {
                for c0 in 0..=(w - side) {
                    for r in 0..side {
                        for c in 0..side {
                            wa[r * side + c] = reference.get(r0 + r, c0 + c);
                            wb[r * side + c] = test.get(r0 + r, c0 + c);
                        }
                    }
                    sum += ssim_statistic(&wa, &wb, c1, c2);
                    count += 1;
                }
            }
            Ok(sum / count as f64)
        }
    }
}

fn ssim_statistic(a: &[f64], b: &[f64], c1: f64, c2: f64) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut cov = 0.0;
    for i in 0..a.len() {
        let da = a[i] - mean_a;
        let db = b[i] - mean_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2))
        / ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2))
}

/// Computes the full metric report between two images.
pub fn metric_report(reference: &Image, test: &Image, window: SsimWindow) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr_db: psnr(reference, test)?,
        ssim: ssim(reference, test, window)?,
        mse: mse(reference, test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_from(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Image::new(width, height, pixels, 255.0).unwrap()
    }

    fn textured(width: usize, height: usize) -> Image {
        image_from(width, height, |r, c| {
            128.0 + 90.0 * ((r as f64 * 0.31).sin() * (c as f64 * 0.47).cos())
        })
    }

    #[test]
    fn identical_images_infinite_psnr() {
        let img = textured(16, 16);
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_hand_case_mse_25() {
        // Reference max 255, uniform error of 5 per pixel:
        // 20 log10(255) - 10 log10(25) = 34.1514 dB.
        let reference = image_from(8, 8, |r, c| if (r, c) == (0, 0) { 255.0 } else { 100.0 });
        let test = reference
            .with_pixels(reference.pixels().iter().map(|p| p - 5.0).collect())
            .unwrap();
        let got = psnr(&reference, &test).unwrap();
        assert!((got - 34.1514).abs() <= 1e-3, "{got}");
    }

    #[test]
    fn doubling_errors_drops_psnr_by_6db() {
        let reference = textured(16, 16);
        let noise: Vec<f64> = (0..256)
            .map(|i| ((i * 31 % 17) as f64 - 8.0) / 3.0)
            .collect();
        let t1 = reference
            .with_pixels(
                reference
                    .pixels()
                    .iter()
                    .zip(&noise)
                    .map(|(p, n)| p + n)
                    .collect(),
            )
            .unwrap();
        let t2 = reference
            .with_pixels(
                reference
                    .pixels()
                    .iter()
                    .zip(&noise)
                    .map(|(p, n)| p + 2.0 * n)
                    .collect(),
            )
            .unwrap();
        let drop = psnr(&reference, &t1).unwrap() - psnr(&reference, &t2).unwrap();
        assert!((drop - 20.0 * 2.0f64.log10()).abs() <= 1e-9, "{drop}");
    }

    #[test]
    fn ssim_self_is_one_both_windows() {
        let img = textured(12, 12);
        for w in [SsimWindow::Global, SsimWindow::Sliding8x8] {
            let s = ssim(&img, &img, w).unwrap();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn ssim_symmetric() {
        let a = textured(16, 16);
        let b = image_from(16, 16, |r, c| 120.0 + (r * 3 + c * 7) as f64 % 50.0);
        for w in [SsimWindow::Global, SsimWindow::Sliding8x8] {
            let ab = ssim(&a, &b, w).unwrap();
            let ba = ssim(&b, &a, w).unwrap();
            assert!((ab - ba).abs() <= 1e-12);
            assert!(ab <= 1.0);
        }
    }

    #[test]
    fn inverted_image_scores_low() {
        let a = textured(32, 32);
        let inverted = a
            .with_pixels(a.pixels().iter().map(|p| 255.0 - p).collect())
            .unwrap();
        let s = ssim(&a, &inverted, SsimWindow::Global).unwrap();
        assert!(s < 0.5, "{s}");
    }

    #[test]
    fn constant_images_equal_value_score_one() {
        let a = image_from(9, 9, |_, _| 40.0);
        let b = image_from(9, 9, |_, _| 40.0);
        let s = ssim(&a, &b, SsimWindow::Sliding8x8).unwrap();
        assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = textured(8, 8);
        let b = textured(8, 9);
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b, SsimWindow::Global).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise_level() {
        // Statistical over a few seeds: more noise, lower PSNR.
        let reference = textured(48, 48);
        let mean_psnr = |sigma: f64| -> f64 {
            [1u64, 2, 3]
                .iter()
                .map(|&seed| {
                    let noisy = crate::noise::add_awgn(&reference, sigma, seed).unwrap();
                    psnr(&reference, &noisy).unwrap()
                })
                .sum::<f64>()
                / 3.0
        };
        let mut last = f64::INFINITY;
        for sigma in [2.0, 8.0, 20.0, 50.0] {
            let p = mean_psnr(sigma);
            assert!(p < last, "sigma {sigma}: psnr {p} did not decrease");
            last = p;
        }
    }

    #[test]
    fn report_json_round_trip_with_infinity() {
        let finite = MetricReport {
            psnr_db: 31.5,
            ssim: 0.9,
            mse: 40.0,
        };
        let j = serde_json::to_string(&finite).unwrap();
        let back: MetricReport = serde_json::from_str(&j).unwrap();
        assert_eq!(back, finite);

        let inf = MetricReport {
            psnr_db: f64::INFINITY,
            ssim: 1.0,
            mse: 0.0,
        };
        let j = serde_json::to_string(&inf).unwrap();
        assert!(j.contains("\"inf\""));
        let back: MetricReport = serde_json::from_str(&j).unwrap();
        assert!(back.psnr_db.is_infinite());
    }
}
