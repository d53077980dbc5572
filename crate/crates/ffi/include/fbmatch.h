#ifndef FBMATCH_H
#define FBMATCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum FbStatus {
  FB_STATUS_OK = 0,
  FB_STATUS_NULL_POINTER = 1,
  FB_STATUS_INVALID_ARGUMENT = 2,
  FB_STATUS_IO = 3,
  FB_STATUS_FORMAT = 4,
  FB_STATUS_DIMENSION = 5,
  FB_STATUS_VALIDATION = 6,
  FB_STATUS_PANIC = 7,
} FbStatus;

// `H x W` object-id mask.
typedef struct FbMask FbMask;

// Global and multi-local matching maps of one object.
typedef struct FbMatchOutput FbMatchOutput;

// `H x W x C` float32 tensor.
typedef struct FbTensor FbTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len - 1` bytes) and returns the full message
// length excluding the terminator. Pass `len = 0` to query the length.
//
// # Safety
// `buf` must be valid for `len` bytes or null when `len` is 0.
size_t fb_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *fb_version(void);

// Creates a tensor from `h * w * c` row-major, channel-last floats.
//
// # Safety
// `data` must point to `h * w * c` floats; `out` must be writable.
enum FbStatus fb_tensor_new(size_t height,
                            size_t width,
                            size_t channels,
                            const float *data,
                            struct FbTensor **out);

// Reads an FBT file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FbStatus fb_tensor_load(const char *path, struct FbTensor **out);

// Writes an FBT file.
//
// # Safety
// `t` must be a live tensor handle; `path` a NUL-terminated string.
enum FbStatus fb_tensor_save(const struct FbTensor *t, const char *path);

// # Safety
// `t` must be a live tensor handle; the out-pointers must be writable.
enum FbStatus fb_tensor_dims(const struct FbTensor *t,
                             size_t *height,
                             size_t *width,
                             size_t *channels);

// Borrowed pointer to the tensor's `h * w * c` floats; null for a null handle.
//
// # Safety
// `t` must be a live tensor handle or null.
const float *fb_tensor_data(const struct FbTensor *t);

// # Safety
// `t` must come from this library and not be freed twice; null is ignored.
void fb_tensor_free(struct FbTensor *t);

// Creates a mask from `h * w` row-major labels (0 = background).
//
// # Safety
// `labels` must point to `h * w` values; `out` must be writable.
enum FbStatus fb_mask_new(size_t height, size_t width, const uint16_t *labels, struct FbMask **out);

// Reads a binary PGM mask.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FbStatus fb_mask_load(const char *path, struct FbMask **out);

// # Safety
// `m` must be a live mask handle; `path` a NUL-terminated string.
enum FbStatus fb_mask_save(const struct FbMask *m, const char *path);

// # Safety
// `m` must be a live mask handle; the out-pointers must be writable.
enum FbStatus fb_mask_dims(const struct FbMask *m, size_t *height, size_t *width);

// Borrowed pointer to the mask's `h * w` labels; null for a null handle.
//
// # Safety
// `m` must be a live mask handle or null.
const uint16_t *fb_mask_labels(const struct FbMask *m);

// # Safety
// `m` must come from this library and not be freed twice; null is ignored.
void fb_mask_free(struct FbMask *m);

// Distance between two embeddings of `len` floats, in `[0, 1)`.
//
// # Safety
// `a` and `b` must point to `len` floats; `out` must be writable.
enum FbStatus fb_pixel_distance(const float *a, const float *b, size_t len, float bias, float *out);

// Global matching against the reference frame and multi-local matching
// against the previous frame for one object. `windows` lists the local
// window radii in increasing order. With `use_oracle` non-zero the
// brute-force reference implementation is used (small frames only).
//
// # Safety
// All handles must be live; `windows` must point to `n_windows` values;
// `out` must be writable.
enum FbStatus fb_match(const struct FbTensor *current,
                       const struct FbTensor *reference,
                       const struct FbMask *reference_mask,
                       const struct FbTensor *previous,
                       const struct FbMask *previous_mask,
                       uint16_t object,
                       const size_t *windows_,
                       size_t n_windows,
                       float bias_fg,
                       float bias_bg,
                       size_t atrous,
                       size_t atrous_origin,
                       int32_t use_oracle,
                       struct FbMatchOutput **out);

// Borrowed global foreground map (`H x W x 1`); null for a null handle.
//
// # Safety
// `m` must be a live match-output handle or null.
const struct FbTensor *fb_match_output_global_fg(const struct FbMatchOutput *m);

// Borrowed global background map; null for a null handle.
//
// # Safety
// `m` must be a live match-output handle or null.
const struct FbTensor *fb_match_output_global_bg(const struct FbMatchOutput *m);

// Number of local windows; 0 for a null handle.
//
// # Safety
// `m` must be a live match-output handle or null.
size_t fb_match_output_window_count(const struct FbMatchOutput *m);

// Radius of window `i`, or 0 when out of range.
//
// # Safety
// `m` must be a live match-output handle or null.
size_t fb_match_output_window(const struct FbMatchOutput *m, size_t i);

// Borrowed local foreground map of window `i`; null when out of range.
//
// # Safety
// `m` must be a live match-output handle or null.
const struct FbTensor *fb_match_output_local_fg(const struct FbMatchOutput *m, size_t i);

// Borrowed local background map of window `i`; null when out of range.
//
// # Safety
// `m` must be a live match-output handle or null.
const struct FbTensor *fb_match_output_local_bg(const struct FbMatchOutput *m, size_t i);

// Number of embedding distances evaluated.
//
// # Safety
// `m` must be a live match-output handle or null.
uint64_t fb_match_output_referred(const struct FbMatchOutput *m);

// # Safety
// `m` must come from this library and not be freed twice; null is ignored.
void fb_match_output_free(struct FbMatchOutput *m);

// Region similarity (IoU) of `object`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum FbStatus fb_jaccard(const struct FbMask *pred,
                         const struct FbMask *gt,
                         uint16_t object,
                         double *out);

// Boundary F-measure of `object`; a negative `tol` selects the default
// tolerance for the frame size.
//
// # Safety
// Handles must be live; `out` must be writable.
enum FbStatus fb_boundary_f(const struct FbMask *pred,
                            const struct FbMask *gt,
                            uint16_t object,
                            double tol,
                            double *out);

// Mean of the hardest `ratio` fraction of `n` per-pixel losses.
//
// # Safety
// `losses` must point to `n` floats; `out` must be writable.
enum FbStatus fb_bootstrapped_ce(const float *losses, size_t n, double ratio, double *out);

// Labels `current` by nearest-neighbor matching against the reference and
// previous frames. `objects` lists the ids to track.
//
// # Safety
// Handles must be live; `objects` must point to `n_objects` values and
// `windows` to `n_windows`; `out` must be writable.
enum FbStatus fb_nn_propagate(const struct FbTensor *reference,
                              const struct FbMask *reference_mask,
                              const struct FbTensor *previous,
                              const struct FbMask *previous_mask,
                              const struct FbTensor *current,
                              const uint16_t *objects,
                              size_t n_objects,
                              float bias_fg,
                              float bias_bg,
                              const size_t *windows_,
                              size_t n_windows,
                              size_t atrous,
                              struct FbMask **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBMATCH_H */
