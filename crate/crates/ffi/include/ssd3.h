#ifndef SSD3_H
#define SSD3_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible entry point.
 */
typedef enum {
  SSD3_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SSD3_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments failed validation (dimensions, ranges, config).
   */
  SSD3_STATUS_INVALID_ARGUMENT = 2,
  /**
   * File could not be read or written.
   */
  SSD3_STATUS_IO = 3,
  /**
   * Unsupported image format or bit depth.
   */
  SSD3_STATUS_UNSUPPORTED = 4,
  /**
   * A pipeline stage failed numerically.
   */
  SSD3_STATUS_NUMERIC = 5,
} Ssd3Status;

/**
 * Opaque grayscale image handle.
 */
typedef struct Ssd3Image Ssd3Image;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *ssd3_version(void);

/**
 * Takes the message of the most recent failure on this thread, or null if
 * none is pending. The caller owns the string (free with
 * [`ssd3_string_free`]).
 */
char *ssd3_last_error_message(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must have been returned by an `ssd3_*` function and not freed yet.
 */
void ssd3_string_free(char *s);

/**
 * Builds an image from row-major pixel values (length `width * height`).
 *
 * # Safety
 * `pixels` must point to `width * height` readable doubles; `out` must be
 * a valid location to store the handle.
 */
Ssd3Status ssd3_image_create(uintptr_t width,
                             uintptr_t height,
                             const double *pixels,
                             Ssd3Image **out);

/**
 * Loads an 8-bit grayscale PGM or PNG image (format from the extension).
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` a valid store location.
 */
Ssd3Status ssd3_image_load(const char *path, Ssd3Image **out);

/**
 * Saves the image as PGM or PNG (format from the extension), clamping and
 * rounding to 8 bits.
 *
 * # Safety
 * `img` must be a live handle from this library, `path` NUL-terminated.
 */
Ssd3Status ssd3_image_save(const Ssd3Image *img, const char *path);

/**
 * Width in pixels (0 for a null handle).
 *
 * # Safety
 * `img` must be null or a live handle.
 */
uintptr_t ssd3_image_width(const Ssd3Image *img);

/**
 * Height in pixels (0 for a null handle).
 *
 * # Safety
 * `img` must be null or a live handle.
 */
uintptr_t ssd3_image_height(const Ssd3Image *img);

/**
 * Copies the row-major pixel values into `out` (`len` must be at least
 * `width * height`).
 *
 * # Safety
 * `img` must be a live handle; `out` must point to `len` writable doubles.
 */
Ssd3Status ssd3_image_pixels(const Ssd3Image *img, double *out, uintptr_t len);

/**
 * Releases an image handle. Null is ignored.
 *
 * # Safety
 * `img` must have been returned by this library and not freed yet.
 */
void ssd3_image_free(Ssd3Image *img);

/**
 * Adds seeded white Gaussian noise of standard deviation `sigma`.
 *
 * # Safety
 * `img` must be a live handle, `out` a valid store location.
 */
Ssd3Status ssd3_add_awgn(const Ssd3Image *img, double sigma, uint64_t seed, Ssd3Image **out);

/**
 * Multiplies by seeded Gamma(looks, 1/looks) speckle (unit mean).
 *
 * # Safety
 * `img` must be a live handle, `out` a valid store location.
 */
Ssd3Status ssd3_add_speckle(const Ssd3Image *img, uint32_t looks, uint64_t seed, Ssd3Image **out);

/**
 * Peak signal-to-noise ratio in dB (infinity when the images are equal).
 *
 * # Safety
 * Both images must be live handles; `out` must be writable.
 */
Ssd3Status ssd3_psnr(const Ssd3Image *reference, const Ssd3Image *test, double *out);

/**
 * Structural similarity; `sliding_window != 0` averages 8x8 windows
 * (stride 1), otherwise one global statistic.
 *
 * # Safety
 * Both images must be live handles; `out` must be writable.
 */
Ssd3Status ssd3_ssim(const Ssd3Image *reference,
                     const Ssd3Image *test,
                     int32_t sliding_window,
                     double *out);

/**
 * Robust noise standard deviation estimate (median absolute difference).
 *
 * # Safety
 * `img` must be a live handle; `out` must be writable.
 */
Ssd3Status ssd3_estimate_sigma(const Ssd3Image *img, double *out);

/**
 * Runs a denoising pipeline described by a JSON config (same schema as the
 * CLI `--config` file) and writes the run artifacts into `out_dir`.
 *
 * On success `*out_image` holds the denoised image and, when
 * `manifest_json` is non-null, `*manifest_json` holds the run manifest as
 * a JSON string (free with [`ssd3_string_free`]).
 *
 * # Safety
 * `noisy` must be a live handle; `config_json` and `out_dir` must be
 * NUL-terminated strings; `out_image` must be a valid store location.
 */
Ssd3Status ssd3_denoise_json(const Ssd3Image *noisy,
                             const char *config_json,
                             const char *out_dir,
                             Ssd3Image **out_image,
                             char **manifest_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSD3_H */
