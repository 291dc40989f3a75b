//! Grayscale image container and 8-bit PGM (P5) / PNG file I/O.
//!
//! Pixels are kept as real values so that intermediate results (noisy or
//! reconstructed images) are never quantized in memory; clamping and
//! rounding happen only when a file is written.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// On-disk formats understood by [`load_image`] and [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    /// Picks the format from a file extension (`.pgm` / `.png`).
    pub fn from_path(path: &Path) -> Result<ImageFormat> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("pgm") => Ok(ImageFormat::Pgm),
            Some("png") => Ok(ImageFormat::Png),
            other => Err(Error::InvalidArgument(format!(
                "cannot infer image format from extension {:?} (use .pgm or .png)",
                other
            ))),
        }
    }
}

/// 2-D grid of grayscale intensities stored row-major as real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    max_value: f64,
    pixels: Vec<f64>,
}

impl Image {
    /// Builds an image, validating the shape/finiteness invariants.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>, max_value: f64) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(
                "image dimensions must be nonzero".into(),
            ));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "pixel buffer of {} values does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if !(max_value > 0.0) || !max_value.is_finite() {
            return Err(Error::InvalidImage(
                "max_value must be positive and finite".into(),
            ));
        }
        if !pixels.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Image {
            width,
            height,
            max_value,
            pixels,
        })
    }

    /// 8-bit image from raw bytes, `max_value = 255`.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Image> {
        Image::new(
            width,
            height,
            bytes.iter().map(|&b| b as f64).collect(),
            255.0,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Replaces the pixel buffer, keeping dimensions.
    pub fn with_pixels(&self, pixels: Vec<f64>) -> Result<Image> {
        Image::new(self.width, self.height, pixels, self.max_value)
    }

    /// Clamps to `[0, max_value]` and rounds half-up to the nearest integer
    /// level, as done when writing 8-bit files.
    pub fn quantized_bytes(&self) -> Result<Vec<u8>> {
        if self.max_value > 255.0 {
            return Err(Error::UnsupportedBitDepth);
        }
        Ok(self
            .pixels
            .iter()
            .map(|&p| (p.clamp(0.0, self.max_value) + 0.5).floor() as u8)
            .collect())
    }

    /// The image with every pixel clamped/rounded exactly as a saved file
    /// would store it.
    pub fn quantized(&self) -> Result<Image> {
        let bytes = self.quantized_bytes()?;
        Image::from_bytes(self.width, self.height, &bytes)
    }
}

/// Reads an 8-bit grayscale image. Higher bit depths and color formats are
/// rejected, never converted silently.
pub fn load_image(path: &Path, format: ImageFormat) -> Result<Image> {
    match format {
        ImageFormat::Pgm => load_pgm(path),
        ImageFormat::Png => load_png(path),
    }
}

/// Writes the image as 8-bit PGM (binary P5) or grayscale PNG. Intensities
/// are clamped to `[0, max_value]` and rounded half-up.
pub fn save_image(img: &Image, path: &Path, format: ImageFormat) -> Result<()> {
    let bytes = img.quantized_bytes()?;
    match format {
        ImageFormat::Pgm => save_pgm(img.width, img.height, &bytes, path),
        ImageFormat::Png => save_png(img.width, img.height, &bytes, path),
    }
}

fn load_pgm(path: &Path) -> Result<Image> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;

    let mut cursor = 0usize;
    if raw.len() < 2 || &raw[0..2] != b"P5" {
        return Err(Error::InvalidImage("not a binary PGM (P5) file".into()));
    }
    cursor += 2;

    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        *slot = read_pnm_int(&raw, &mut cursor)?;
    }
    let (width, height, maxval) = (header[0], header[1], header[2]);
    if maxval == 0 {
        return Err(Error::InvalidImage("PGM maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedBitDepth);
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cursor >= raw.len() || !raw[cursor].is_ascii_whitespace() {
        return Err(Error::InvalidImage("malformed PGM header".into()));
    }
    cursor += 1;

    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::InvalidImage("PGM dimensions overflow".into()))?;
    if raw.len() < cursor + need {
        return Err(Error::InvalidImage("truncated PGM raster".into()));
    }
    Image::from_bytes(width, height, &raw[cursor..cursor + need])
}

/// Parses one ASCII integer from a PNM header, skipping whitespace and
/// `#` comment lines.
fn read_pnm_int(raw: &[u8], cursor: &mut usize) -> Result<usize> {
    loop {
        while *cursor < raw.len() && raw[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < raw.len() && raw[*cursor] == b'#' {
            while *cursor < raw.len() && raw[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < raw.len() && raw[*cursor].is_ascii_digit() {
        *cursor += 1;
    }
    if *cursor == start {
        return Err(Error::InvalidImage("malformed PGM header".into()));
    }
    std::str::from_utf8(&raw[start..*cursor])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidImage("malformed PGM header".into()))
}

fn save_pgm(width: usize, height: usize, bytes: &[u8], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    (|| -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", width, height)?;
        w.write_all(bytes)?;
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

fn load_png(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::InvalidImage(format!("bad PNG: {e}")))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth);
    }
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::UnsupportedColorFormat);
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(width * height)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::InvalidImage(format!("bad PNG: {e}")))?;
    Image::from_bytes(width, height, &buf[..frame.buffer_size()])
}

fn save_png(width: usize, height: usize, bytes: &[u8], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::InvalidImage(format!("PNG encode: {e}")))?;
    writer
        .write_image_data(bytes)
        .map_err(|e| Error::InvalidImage(format!("PNG encode: {e}")))?;
    Ok(())
}
