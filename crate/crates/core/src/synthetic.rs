//! Deterministic synthetic grayscale test images.
//!
//! The denoising experiments need clean 8-bit reference images with the
//! ingredients natural test pictures have: flat regions, sharp edges,
//! oriented textures, fine repeating detail and smooth gradients. These
//! generators are closed-form and quantized to 8 bits, so every run of the
//! test corpus is identical.

use crate::image::Image;

/// Names of the bundled generators, in corpus order.
pub const CORPUS: [&str; 3] = ["blocks", "waves", "rings"];

/// Builds a corpus image by name.
pub fn by_name(name: &str, size: usize) -> Option<Image> {
    match name {
        "blocks" => Some(blocks(size)),
        "waves" => Some(waves(size)),
        "rings" => Some(rings(size)),
        _ => None,
    }
}

fn quantize(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Image {
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            pixels.push(f(r, c).clamp(0.0, 255.0).round());
        }
    }
    Image::new(width, height, pixels, 255.0).unwrap()
}

/// Piecewise-constant rectangles over a gentle gradient, with thin lines and
/// isolated dots: a cartoon-like image dominated by edges.
pub fn blocks(size: usize) -> Image {
    let s = size as f64;
    quantize(size, size, |r, c| {
        let (y, x) = (r as f64 / s, c as f64 / s);
        let mut v = 70.0 + 60.0 * x + 20.0 * y;

        let rects: [(f64, f64, f64, f64, f64); 5] = [
            (0.08, 0.08, 0.38, 0.30, 205.0),
            (0.55, 0.12, 0.90, 0.42, 35.0),
            (0.15, 0.55, 0.45, 0.88, 150.0),
            (0.60, 0.58, 0.78, 0.76, 240.0),
            (0.66, 0.64, 0.72, 0.70, 90.0),
        ];
        for &(y0, x0, y1, x1, level) in &rects {
            if y >= y0 && y < y1 && x >= x0 && x < x1 {
                v = level;
            }
        }

        // Thin vertical lines, one pixel wide, in the lower-left quadrant.
        if y > 0.52 && x < 0.48 && c % 19 == 3 {
            v = if (c / 19) % 2 == 0 { 250.0 } else { 20.0 };
        }
        // A sparse grid of single-pixel dots.
        if r % 41 == 7 && c % 37 == 11 {
            v = 255.0 - v;
        }
        v
    })
}

/// Oriented gratings over piecewise-smooth geometry: a diagonal edge, a
/// half-disk, two striped bands of different orientation, a faint sub-noise
/// texture strip and sparse thin lines.
pub fn waves(size: usize) -> Image {
    let s = size as f64;
    quantize(size, size, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let (yn, xn) = (y / s, x / s);
        let mut v = 90.0 + 55.0 * yn;

        // Bright triangular region above the anti-diagonal.
        if xn + 1.4 * yn < 0.85 {
            v = 196.0 - 28.0 * xn;
        }
        // Dark half-disk on the right edge.
        let (dy, dx) = (y - 0.52 * s, x - 1.02 * s);
        if (dy * dy + dx * dx).sqrt() < 0.3 * s {
            v = 48.0 + 20.0 * yn;
        }
        // Two strong grating bands (fabric-like stripes).
        if yn > 0.68 && yn < 0.94 && xn < 0.55 {
            v = 128.0 + 46.0 * (1.05 * x + 0.35 * y).sin();
        }
        if xn > 0.62 && xn < 0.9 && yn > 0.05 && yn < 0.33 {
            v = 120.0 + 42.0 * (0.4 * x - 0.95 * y).sin();
        }
        // Faint texture strip, amplitude well below the test noise level.
        if yn > 0.4 && yn < 0.56 && xn > 0.1 && xn < 0.62 {
            v += 13.0 * (0.85 * x).sin() + 8.0 * (0.6 * y + 0.3 * x).cos();
        }
        // Sparse thin verticals and dots.
        if c % 53 == 29 && yn < 0.4 {
            v -= 75.0;
        }
        if r % 47 == 13 && c % 43 == 37 {
            v = 255.0 - v;
        }
        v
    })
}

/// Concentric rings around an off-center point, a smooth radial ramp, and a
/// fine checkerboard patch: mixes curvature, smoothness and detail at the
/// pixel scale.
pub fn rings(size: usize) -> Image {
    let s = size as f64;
    quantize(size, size, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let (dy, dx) = (y - 0.42 * s, x - 0.58 * s);
        let dist = (dy * dy + dx * dx).sqrt();
        let mut v = 120.0 + 58.0 * (0.22 * dist).sin() * (-dist / (0.9 * s)).exp();
        v += 40.0 * (1.0 - dist / (1.2 * s));

        // Fine 2x2 checkerboard in the lower-left corner block.
        let (yn, xn) = (y / s, x / s);
        if yn > 0.72 && xn < 0.28 {
            v = if ((r / 2) + (c / 2)) % 2 == 0 {
                190.0
            } else {
                60.0
            };
        }
        // A smooth bright blob upper-left.
        let (by, bx) = (y - 0.18 * s, x - 0.15 * s);
        v += 70.0 * (-(by * by + bx * bx) / (2.0 * (0.07 * s).powi(2))).exp();
        v
    })
}
