#ifndef MOTIONSEP_H
#define MOTIONSEP_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_IO = 3,
  MS_STATUS_FORMAT = 4,
  // The input cannot be processed, e.g. a frame too small to separate.
  MS_STATUS_DEGENERATE = 5,
  MS_STATUS_BUFFER_TOO_SMALL = 6,
  MS_STATUS_PANIC = 7,
} MsStatus;

// Camera motion label; values match `ms_camera_label_name`.
typedef enum MsCameraLabel {
  MS_CAMERA_LABEL_STATIC = 0,
  MS_CAMERA_LABEL_PAN_LEFT = 1,
  MS_CAMERA_LABEL_PAN_RIGHT = 2,
  MS_CAMERA_LABEL_TILT_UP = 3,
  MS_CAMERA_LABEL_TILT_DOWN = 4,
  MS_CAMERA_LABEL_ZOOM_IN = 5,
  MS_CAMERA_LABEL_ZOOM_OUT = 6,
  MS_CAMERA_LABEL_COMPOSITE = 7,
} MsCameraLabel;

// Opaque dense flow field.
typedef struct MsFlowField MsFlowField;

// Opaque trained activity classifier.
typedef struct MsModelBundle MsModelBundle;

// Opaque output of a global/local separation.
typedef struct MsSeparation MsSeparation;

// Per-axis camera model: x' = m0*x + m1, y' = m2*y + m3.
typedef struct MsCameraModel {
  double m0;
  double m1;
  double m2;
  double m3;
} MsCameraModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL after a
// success. The pointer stays valid until the next call on this thread.
const char *ms_last_error(void);

// Creates a field from `2*width*height` interleaved (dx, dy) values.
//
// # Safety
// `data` must point to `2*width*height` readable doubles.
enum MsStatus ms_flow_new(size_t width,
                          size_t height,
                          const double *data,
                          struct MsFlowField **out_flow);

// Reads a `.flo` file.
//
// # Safety
// `path` must be a NUL-terminated string.
enum MsStatus ms_flow_read(const char *path, struct MsFlowField **out_flow);

// Writes a `.flo` file.
//
// # Safety
// `flow` must be a live handle and `path` a NUL-terminated string.
enum MsStatus ms_flow_write(const struct MsFlowField *flow, const char *path);

// Width and height of a field.
//
// # Safety
// `flow` must be a live handle; the out pointers must be writable.
enum MsStatus ms_flow_dims(const struct MsFlowField *flow, size_t *out_width, size_t *out_height);

// Copies the interleaved (dx, dy) values into `buf`, which must hold at
// least `2*width*height` doubles.
//
// # Safety
// `flow` must be a live handle and `buf` writable for `len` doubles.
enum MsStatus ms_flow_copy_data(const struct MsFlowField *flow, double *buf, size_t len);

// # Safety
// `flow` must be NULL or a handle not yet freed.
void ms_flow_free(struct MsFlowField *flow);

// Renders a field as 8-bit RGB into `buf` (row-major, 3 bytes per pixel).
// `max_magnitude <= 0` scales by the field's own maximum.
//
// # Safety
// `flow` must be a live handle and `buf` writable for `len` bytes.
enum MsStatus ms_flow_color_code(const struct MsFlowField *flow,
                                 double max_magnitude,
                                 uint8_t *buf,
                                 size_t len);

// Splits a mixed field into global and local parts with local threshold
// `threshold` (pixels/frame).
//
// # Safety
// `mixed` must be a live handle; `out_sep` must be writable.
enum MsStatus ms_separate(const struct MsFlowField *mixed,
                          double threshold,
                          struct MsSeparation **out_sep);

// A new handle holding a copy of the global field.
//
// # Safety
// `sep` must be a live handle; `out_flow` must be writable.
enum MsStatus ms_separation_global(const struct MsSeparation *sep, struct MsFlowField **out_flow);

// A new handle holding a copy of the local field.
//
// # Safety
// `sep` must be a live handle; `out_flow` must be writable.
enum MsStatus ms_separation_local(const struct MsSeparation *sep, struct MsFlowField **out_flow);

// # Safety
// `sep` must be NULL or a handle not yet freed.
void ms_separation_free(struct MsSeparation *sep);

// Least-squares camera model of a (global) field.
//
// # Safety
// `flow` must be a live handle; `out_model` must be writable.
enum MsStatus ms_fit_camera_model(const struct MsFlowField *flow, struct MsCameraModel *out_model);

// Labels a camera model for a `width` x `height` frame. Tolerances are in
// pixels and in deviation of the scale from 1; pass negatives for defaults.
//
// # Safety
// `model` must be readable; `out_label` must be writable.
enum MsStatus ms_classify_camera_motion(const struct MsCameraModel *model,
                                        size_t width,
                                        size_t height,
                                        double translation_tol,
                                        double scale_tol,
                                        enum MsCameraLabel *out_label);

// Static, NUL-terminated name of a label, e.g. "pan-left".
const char *ms_camera_label_name(enum MsCameraLabel label);

// 12-way event index of an (activity, success) pair via the Kronecker
// product of the one-hot vectors. `success` is 0 or 1.
//
// # Safety
// `out_index` must be writable.
enum MsStatus ms_event12_index(size_t activity, uint8_t success, size_t *out_index);

// Maps a 12-way event index to the 11-way space where both steal events
// coincide.
//
// # Safety
// `out_index` must be writable.
enum MsStatus ms_merge_steal_index(size_t index12, size_t *out_index);

// Writes 1 if any of the `n` frame scores exceeds `threshold`, else 0.
//
// # Safety
// `scores` must point to `n` readable doubles; `out_success` must be writable.
enum MsStatus ms_clip_success(const double *scores,
                              size_t n,
                              double threshold,
                              uint8_t *out_success);

// Accuracy of a row-major `classes` x `classes` confusion matrix
// (rows = truth, columns = prediction).
//
// # Safety
// `counts` must hold `classes*classes` values; `out_value` must be writable.
enum MsStatus ms_accuracy(const uint64_t *counts, size_t classes, double *out_value);

// Mean of per-class precisions; classes never predicted count as zero.
//
// # Safety
// `counts` must hold `classes*classes` values; `out_value` must be writable.
enum MsStatus ms_mean_average_precision(const uint64_t *counts, size_t classes, double *out_value);

// Loads a model written by `motionsep train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out_model` must be writable.
enum MsStatus ms_model_load(const char *path, struct MsModelBundle **out_model);

// Activity probabilities for a clip of `n` mixed-flow frames, written to
// `out_probs` (at least 6 doubles). `fuse_ratio` weighs the global stream
// against the local one for two-stream models.
//
// # Safety
// `model` must be a live handle, `frames` must point to `n` live handles and
// `out_probs` must be writable for `len` doubles.
enum MsStatus ms_model_classify_clip(const struct MsModelBundle *model,
                                     const struct MsFlowField *const *frames,
                                     size_t n,
                                     double fuse_ratio,
                                     double *out_probs,
                                     size_t len);

// # Safety
// `model` must be NULL or a handle not yet freed.
void ms_model_free(struct MsModelBundle *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOTIONSEP_H */
