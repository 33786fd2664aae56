#ifndef PIXELMILL_H
#define PIXELMILL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_ARGUMENT = 1,
  PM_STATUS_INVALID_ARGUMENT = 2,
  PM_STATUS_IO = 3,
  PM_STATUS_FORMAT = 4,
  PM_STATUS_SPEC = 5,
  PM_STATUS_EMPTY_ROI = 6,
  PM_STATUS_PANIC = 99,
} PmStatus;

typedef enum PmPadding {
  PM_PADDING_ZERO = 0,
  PM_PADDING_REPLICATE = 1,
} PmPadding;

/**
 * An 8-bit grayscale image.
 */
typedef struct PmImage PmImage;

/**
 * A parsed filter pipeline with its datapath settings.
 */
typedef struct PmPipeline PmPipeline;

/**
 * Region statistics on intensities scaled to [0, 1].
 */
typedef struct PmStats {
  double mean;
  double variance;
  double std_dev;
  size_t pixel_count;
} PmStats;

/**
 * Difference between two frames. `psnr_db` is +infinity when identical.
 */
typedef struct PmDiff {
  double max_abs_diff;
  double mean_abs_diff;
  double psnr_db;
  bool identical;
} PmDiff;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into this library from the same thread.
 */
const char *pm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pm_version(void);

/**
 * Copy `width * height` bytes from `data` into a new image.
 */
enum PmStatus pm_image_new(size_t width, size_t height, const uint8_t *data, struct PmImage **out);

/**
 * Read a PGM or PPM file; colour input is converted to luma.
 */
enum PmStatus pm_image_read(const char *path, struct PmImage **out);

/**
 * Write a binary PGM. The file appears complete or not at all.
 */
enum PmStatus pm_image_write(const struct PmImage *image, const char *path);

size_t pm_image_width(const struct PmImage *image);

size_t pm_image_height(const struct PmImage *image);

/**
 * Row-major pixels, `width * height` bytes, owned by the image.
 */
const uint8_t *pm_image_data(const struct PmImage *image);

void pm_image_free(struct PmImage *image);

/**
 * Parse a stage list such as `gauss,sobel:abs,thresh=80`.
 */
enum PmStatus pm_pipeline_parse(const char *text, struct PmPipeline **out);

enum PmStatus pm_pipeline_set_padding(struct PmPipeline *pipeline, enum PmPadding padding);

/**
 * Run the streaming fixed-point model.
 */
enum PmStatus pm_pipeline_run(const struct PmPipeline *pipeline,
                              const struct PmImage *image,
                              struct PmImage **out);

/**
 * Run the floating-point full-frame reference.
 */
enum PmStatus pm_pipeline_run_reference(const struct PmPipeline *pipeline,
                                        const struct PmImage *image,
                                        struct PmImage **out);

void pm_pipeline_free(struct PmPipeline *pipeline);

/**
 * Statistics over a region given as `rect:x,y,w,h` or `ellipse:cx,cy,rx,ry`.
 */
enum PmStatus pm_roi_stats(const struct PmImage *image, const char *roi, struct PmStats *out);

enum PmStatus pm_compare(const struct PmImage *a, const struct PmImage *b, struct PmDiff *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIXELMILL_H */
