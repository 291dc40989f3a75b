//! C ABI for the ssd3 denoising library.
//!
//! Conventions:
//! - Images are opaque handles created and released by this library.
//! - Every fallible call returns an [`Ssd3Status`]; on failure the message
//!   is retrievable (once) via [`ssd3_last_error_message`].
//! - Strings returned by the library are freed with [`ssd3_string_free`],
//!   images with [`ssd3_image_free`]. Nothing else transfers ownership.
//!
//! The matching C header is generated into `include/ssd3.h` by the build
//! script (cbindgen).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use ssd3::image::{load_image, save_image, Image, ImageFormat};
use ssd3::metrics::SsimWindow;
use ssd3::noise;
use ssd3::pipeline::{self, PipelineConfig};
use ssd3::Error;

/// Opaque grayscale image handle.
pub struct Ssd3Image {
    inner: Image,
}

/// Result codes of every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ssd3Status {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments failed validation (dimensions, ranges, config).
    InvalidArgument = 2,
    /// File could not be read or written.
    Io = 3,
    /// Unsupported image format or bit depth.
    Unsupported = 4,
    /// A pipeline stage failed numerically.
    Numeric = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

fn fail(err: &Error) -> Ssd3Status {
    let message = CString::new(err.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
    match err {
        Error::Io { .. } => Ssd3Status::Io,
        Error::UnsupportedBitDepth | Error::UnsupportedColorFormat => Ssd3Status::Unsupported,
        Error::NonFiniteInput | Error::EmptyCoding => Ssd3Status::Numeric,
        Error::Stage { source, .. } | Error::Column { source, .. } => match fail(source) {
            Ssd3Status::Ok => Ssd3Status::Numeric,
            other => other,
        },
        _ => Ssd3Status::InvalidArgument,
    }
}

fn fail_msg(status: Ssd3Status, message: &str) -> Ssd3Status {
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
    status
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ssd3_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Takes the message of the most recent failure on this thread, or null if
/// none is pending. The caller owns the string (free with
/// [`ssd3_string_free`]).
#[no_mangle]
pub extern "C" fn ssd3_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow_mut().take() {
        Some(message) => message.into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by an `ssd3_*` function and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ssd3_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an image from row-major pixel values (length `width * height`).
///
/// # Safety
/// `pixels` must point to `width * height` readable doubles; `out` must be
/// a valid location to store the handle.
#[no_mangle]
pub unsafe extern "C" fn ssd3_image_create(
    width: usize,
    height: usize,
    pixels: *const f64,
    out: *mut *mut Ssd3Image,
) -> Ssd3Status {
    clear_error();
    if pixels.is_null() || out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "pixels/out must not be null");
    }
    let len = match width.checked_mul(height) {
        Some(len) if len > 0 => len,
        _ => return fail_msg(Ssd3Status::InvalidArgument, "bad image dimensions"),
    };
    let data = std::slice::from_raw_parts(pixels, len).to_vec();
    match Image::new(width, height, data, 255.0) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(Ssd3Image { inner }));
            Ssd3Status::Ok
        }
        Err(e) => fail(&e),
    }
}

unsafe fn path_from(ptr_c: *const c_char) -> Result<&'static Path, Ssd3Status> {
    if ptr_c.is_null() {
        return Err(fail_msg(Ssd3Status::NullArgument, "path must not be null"));
    }
    match CStr::from_ptr(ptr_c).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail_msg(
            Ssd3Status::InvalidArgument,
            "path is not valid UTF-8",
        )),
    }
}

/// Loads an 8-bit grayscale PGM or PNG image (format from the extension).
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid store location.
#[no_mangle]
pub unsafe extern "C" fn ssd3_image_load(
    path: *const c_char,
    out: *mut *mut Ssd3Image,
) -> Ssd3Status {
    clear_error();
    if out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "out must not be null");
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let format = match ImageFormat::from_path(path) {
        Ok(f) => f,
        Err(e) => return fail(&e),
    };
    match load_image(path, format) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(Ssd3Image { inner }));
            Ssd3Status::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Saves the image as PGM or PNG (format from the extension), clamping and
/// rounding to 8 bits.
///
/// # Safety
/// `img` must be a live handle from this library, `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ssd3_image_save(img: *const Ssd3Image, path: *const c_char) -> Ssd3Status {
    clear_error();
    let Some(img) = img.as_ref() else {
        return fail_msg(Ssd3Status::NullArgument, "image must not be null");
    };
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let format = match ImageFormat::from_path(path) {
        Ok(f) => f,
        Err(e) => return fail(&e),
    };
    match save_image(&img.inner, path, format) {
        Ok(()) => Ssd3Status::Ok,
        Err(e) => fail(&e),
    }
}

/// Width in pixels (0 for a null handle).
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssd3_image_width(img: *const Ssd3Image) -> usize {
    img.as_ref().map_or(0, |i| i.inner.width())
}

/// Height in pixels (0 for a null handle).
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssd3_image_height(img: *const Ssd3Image) -> usize {
    img.as_ref().map_or(0, |i| i.inner.height())
}

/// Copies the row-major pixel values into `out` (`len` must be at least
/// `width * height`).
///
/// # Safety
/// `img` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ssd3_image_pixels(
    img: *const Ssd3Image,
    out: *mut f64,
    len: usize,
) -> Ssd3Status {
    clear_error();
    let Some(img) = img.as_ref() else {
        return fail_msg(Ssd3Status::NullArgument, "image must not be null");
    };
    if out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "out must not be null");
    }
    let pixels = img.inner.pixels();
    if len < pixels.len() {
        return fail_msg(Ssd3Status::InvalidArgument, "buffer too small");
    }
    ptr::copy_nonoverlapping(pixels.as_ptr(), out, pixels.len());
    Ssd3Status::Ok
}

/// Releases an image handle. Null is ignored.
///
/// # Safety
/// `img` must have been returned by this library and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ssd3_image_free(img: *mut Ssd3Image) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Adds seeded white Gaussian noise of standard deviation `sigma`.
///
/// # Safety
/// `img` must be a live handle, `out` a valid store location.
#[no_mangle]
pub unsafe extern "C" fn ssd3_add_awgn(
    img: *const Ssd3Image,
    sigma: f64,
    seed: u64,
    out: *mut *mut Ssd3Image,
) -> Ssd3Status {
    clear_error();
    let Some(img) = img.as_ref() else {
        return fail_msg(Ssd3Status::NullArgument, "image must not be null");
    };
    if out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "out must not be null");
    }
    match noise::add_awgn(&img.inner, sigma, seed) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(Ssd3Image { inner }));
            Ssd3Status::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Multiplies by seeded Gamma(looks, 1/looks) speckle (unit mean).
///
/// # Safety
/// `img` must be a live handle, `out` a valid store location.
#[no_mangle]
pub unsafe extern "C" fn ssd3_add_speckle(
    img: *const Ssd3Image,
    looks: u32,
    seed: u64,
    out: *mut *mut Ssd3Image,
) -> Ssd3Status {
    clear_error();
    let Some(img) = img.as_ref() else {
        return fail_msg(Ssd3Status::NullArgument, "image must not be null");
    };
    if out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "out must not be null");
    }
    match noise::add_speckle(&img.inner, looks, seed) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(Ssd3Image { inner }));
            Ssd3Status::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Peak signal-to-noise ratio in dB (infinity when the images are equal).
///
/// # Safety
/// Both images must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssd3_psnr(
    reference: *const Ssd3Image,
    test: *const Ssd3Image,
    out: *mut f64,
) -> Ssd3Status {
    clear_error();
    let (Some(reference), Some(test)) = (reference.as_ref(), test.as_ref()) else {
        return fail_msg(Ssd3Status::NullArgument, "images must not be null");
    };
    if out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "out must not be null");
    }
    match ssd3::metrics::psnr(&reference.inner, &test.inner) {
        Ok(v) => {
            *out = v;
            Ssd3Status::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Structural similarity; `sliding_window != 0` averages 8x8 windows
/// (stride 1), otherwise one global statistic.
///
/// # Safety
/// Both images must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssd3_ssim(
    reference: *const Ssd3Image,
    test: *const Ssd3Image,
    sliding_window: i32,
    out: *mut f64,
) -> Ssd3Status {
    clear_error();
    let (Some(reference), Some(test)) = (reference.as_ref(), test.as_ref()) else {
        return fail_msg(Ssd3Status::NullArgument, "images must not be null");
    };
    if out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "out must not be null");
    }
    let window = if sliding_window != 0 {
        SsimWindow::Sliding8x8
    } else {
        SsimWindow::Global
    };
    match ssd3::metrics::ssim(&reference.inner, &test.inner, window) {
        Ok(v) => {
            *out = v;
            Ssd3Status::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Robust noise standard deviation estimate (median absolute difference).
///
/// # Safety
/// `img` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssd3_estimate_sigma(img: *const Ssd3Image, out: *mut f64) -> Ssd3Status {
    clear_error();
    let Some(img) = img.as_ref() else {
        return fail_msg(Ssd3Status::NullArgument, "image must not be null");
    };
    if out.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "out must not be null");
    }
    *out = noise::estimate_sigma_mad(&img.inner);
    Ssd3Status::Ok
}

/// Runs a denoising pipeline described by a JSON config (same schema as the
/// CLI `--config` file) and writes the run artifacts into `out_dir`.
///
/// On success `*out_image` holds the denoised image and, when
/// `manifest_json` is non-null, `*manifest_json` holds the run manifest as
/// a JSON string (free with [`ssd3_string_free`]).
///
/// # Safety
/// `noisy` must be a live handle; `config_json` and `out_dir` must be
/// NUL-terminated strings; `out_image` must be a valid store location.
#[no_mangle]
pub unsafe extern "C" fn ssd3_denoise_json(
    noisy: *const Ssd3Image,
    config_json: *const c_char,
    out_dir: *const c_char,
    out_image: *mut *mut Ssd3Image,
    manifest_json: *mut *mut c_char,
) -> Ssd3Status {
    clear_error();
    let Some(noisy) = noisy.as_ref() else {
        return fail_msg(Ssd3Status::NullArgument, "image must not be null");
    };
    if config_json.is_null() || out_image.is_null() {
        return fail_msg(Ssd3Status::NullArgument, "config/out must not be null");
    }
    let out_dir = match path_from(out_dir) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let config_text = match CStr::from_ptr(config_json).to_str() {
        Ok(s) => s,
        Err(_) => return fail_msg(Ssd3Status::InvalidArgument, "config is not valid UTF-8"),
    };
    let cfg: PipelineConfig = match serde_json::from_str(config_text) {
        Ok(cfg) => cfg,
        Err(e) => {
            return fail_msg(
                Ssd3Status::InvalidArgument,
                &format!("bad config JSON: {e}"),
            )
        }
    };
    match pipeline::denoise(&noisy.inner, None, &cfg, out_dir) {
        Ok((image, manifest)) => {
            if !manifest_json.is_null() {
                let text = serde_json::to_string_pretty(&manifest).unwrap_or_default();
                *manifest_json = CString::new(text).unwrap_or_default().into_raw();
            }
            *out_image = Box::into_raw(Box::new(Ssd3Image { inner: image }));
            Ssd3Status::Ok
        }
        Err(e) => fail(&e),
    }
}
