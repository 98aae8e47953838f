#ifndef IRISPAD_H
#define IRISPAD_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Values are stable.
 */
typedef enum IrispadStatus {
  IRISPAD_STATUS_OK = 0,
  IRISPAD_STATUS_NULL_ARGUMENT = 1,
  IRISPAD_STATUS_INVALID_UTF8 = 2,
  IRISPAD_STATUS_PANIC = 3,
  IRISPAD_STATUS_MALFORMED_HEADER = 10,
  IRISPAD_STATUS_TRUNCATED_PAYLOAD = 11,
  IRISPAD_STATUS_IO_FAILURE = 12,
  IRISPAD_STATUS_CROP_TOO_LARGE = 13,
  IRISPAD_STATUS_EVEN_KERNEL = 14,
  IRISPAD_STATUS_INVALID_IMAGE = 15,
  IRISPAD_STATUS_NO_BOUNDARY_FOUND = 20,
  IRISPAD_STATUS_SEARCH_RANGE_INVALID = 21,
  IRISPAD_STATUS_DIMENSION_MISMATCH = 22,
  IRISPAD_STATUS_INVALID_CIRCLES = 23,
  IRISPAD_STATUS_MALFORMED_SIDECAR = 24,
  IRISPAD_STATUS_EMPTY_MASK = 30,
  IRISPAD_STATUS_MALFORMED_FILTER_FILE = 40,
  IRISPAD_STATUS_EVEN_KERNEL_SIDE = 41,
  IRISPAD_STATUS_SHAPE_MISMATCH = 42,
  IRISPAD_STATUS_INSUFFICIENT_OVERLAP = 43,
  IRISPAD_STATUS_MALFORMED_TEMPLATE_FILE = 44,
  IRISPAD_STATUS_TOO_FEW_VALID_PIXELS = 50,
  IRISPAD_STATUS_INVALID_GEOMETRY = 51,
  IRISPAD_STATUS_MISSING_FILTER_BANK = 60,
  IRISPAD_STATUS_SINGLE_CLASS_TRAINING_SET = 61,
  IRISPAD_STATUS_INVALID_ENSEMBLE = 62,
  IRISPAD_STATUS_MALFORMED_MODEL_FILE = 63,
  IRISPAD_STATUS_MALFORMED_FEATURE_FILE = 64,
  IRISPAD_STATUS_DEGENERATE_DISTRIBUTIONS = 70,
  IRISPAD_STATUS_UNREACHABLE_OPERATING_POINT = 71,
  IRISPAD_STATUS_EMPTY_CLASS = 72,
  IRISPAD_STATUS_MALFORMED_SCORE_FILE = 73,
  IRISPAD_STATUS_INVALID_SPEC = 80,
  IRISPAD_STATUS_CONFIG = 90,
  IRISPAD_STATUS_EMPTY_MANIFEST = 91,
  IRISPAD_STATUS_MALFORMED_MANIFEST = 92,
} IrispadStatus;

/**
 * Texture PAD classifier ensemble.
 */
typedef struct IrispadEnsemble IrispadEnsemble;

/**
 * 8-bit grayscale image.
 */
typedef struct IrispadImage IrispadImage;

/**
 * Iris template (bit-planes plus validity mask).
 */
typedef struct IrispadTemplate IrispadTemplate;

/**
 * A PAD verdict: `score >= threshold` exactly when `is_attack` is set.
 */
typedef struct IrispadPadResult {
  double score;
  double threshold;
  bool is_attack;
} IrispadPadResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last error on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *irispad_last_error(void);

/**
 * Static name of a status code, e.g. `"MalformedFilterFile"`.
 */
const char *irispad_status_name(enum IrispadStatus status);

/**
 * Reads a binary PGM (P5, maxval 255).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrispadStatus irispad_image_read(const char *path, struct IrispadImage **out);

/**
 * Copies `width * height` row-major bytes into a new image.
 *
 * # Safety
 * `pixels` must point to `width * height` readable bytes.
 */
enum IrispadStatus irispad_image_new(size_t width,
                                     size_t height,
                                     const uint8_t *pixels,
                                     struct IrispadImage **out);

/**
 * # Safety
 * `img` must be a live handle or null.
 */
size_t irispad_image_width(const struct IrispadImage *img);

/**
 * # Safety
 * `img` must be a live handle or null.
 */
size_t irispad_image_height(const struct IrispadImage *img);

/**
 * # Safety
 * `img` must come from this library and not be used afterwards.
 */
void irispad_image_free(struct IrispadImage *img);

/**
 * Segments, normalizes (64 x 512) and encodes with the shipped 8-filter
 * recognition bank.
 *
 * # Safety
 * `img` must be a live handle and `out` a valid pointer.
 */
enum IrispadStatus irispad_template_enroll(const struct IrispadImage *img,
                                           struct IrispadTemplate **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrispadStatus irispad_template_read(const char *path, struct IrispadTemplate **out);

/**
 * # Safety
 * `t` must be a live handle and `path` a NUL-terminated string.
 */
enum IrispadStatus irispad_template_write(const struct IrispadTemplate *t, const char *path);

/**
 * Fractional Hamming distance minimized over `max_shift` column shifts.
 *
 * # Safety
 * Handles must be live; `score` and `shift` valid pointers.
 */
enum IrispadStatus irispad_template_match(const struct IrispadTemplate *a,
                                          const struct IrispadTemplate *b,
                                          size_t max_shift,
                                          double *score,
                                          ptrdiff_t *shift);

/**
 * # Safety
 * `t` must come from this library and not be used afterwards.
 */
void irispad_template_free(struct IrispadTemplate *t);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrispadStatus irispad_ensemble_read(const char *path, struct IrispadEnsemble **out);

/**
 * # Safety
 * `e` must come from this library and not be used afterwards.
 */
void irispad_ensemble_free(struct IrispadEnsemble *e);

/**
 * Photometric-stereo PAD. The iris region is found by segmenting `left`;
 * lights sit at `theta_deg` either side of the optical axis.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum IrispadStatus irispad_pad3d(const struct IrispadImage *left,
                                 const struct IrispadImage *right,
                                 double theta_deg,
                                 double tau3,
                                 struct IrispadPadResult *out);

/**
 * Texture PAD over the shipped scales and a 300 x 300 central crop.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum IrispadStatus irispad_pad2d(const struct IrispadImage *img,
                                 const struct IrispadEnsemble *ensemble,
                                 struct IrispadPadResult *out);

/**
 * Cascaded PAD: 3D first, 2D only when 3D says live.
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum IrispadStatus irispad_pad_fused(const struct IrispadImage *left,
                                     const struct IrispadImage *right,
                                     const struct IrispadEnsemble *ensemble,
                                     double theta_deg,
                                     double tau3,
                                     struct IrispadPadResult *out);

/**
 * Library version, e.g. `"0.1.0"`.
 */
const char *irispad_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRISPAD_H */
