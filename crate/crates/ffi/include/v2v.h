#ifndef V2V_H
#define V2V_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum V2vStatus {
  V2V_STATUS_OK = 0,
  V2V_STATUS_NULL_POINTER = 1,
  /*
   Invalid configuration or argument value.
   */
  V2V_STATUS_INVALID_ARGUMENT = 2,
  /*
   Malformed or inconsistent input data.
   */
  V2V_STATUS_DATA_ERROR = 3,
  V2V_STATUS_IO_ERROR = 4,
  V2V_STATUS_INDEX_OUT_OF_RANGE = 5,
  /*
   A caller buffer has the wrong length.
   */
  V2V_STATUS_BUFFER_SIZE = 6,
  V2V_STATUS_PANIC = 7,
} V2vStatus;

/*
 Opaque dataset handle.
 */
typedef struct V2vDataset V2vDataset;

/*
 Dataset configuration. Ranges are `[lo, hi]`; set `lo == hi` for a fixed value.
 */
typedef struct V2vDatasetConfig {
  size_t bins;
  size_t voxels;
  /*
   Frames between window starts; 0 means the window length.
   */
  size_t stride;
  uint64_t seed;
  /*
   True freezes sensor parameters and crops across epochs.
   */
  bool fixed_policy;
  double c_pos_lo;
  double c_pos_hi;
  double c_neg_lo;
  double c_neg_hi;
  double sigma_bg_lo;
  double sigma_bg_hi;
  double hot_frac_lo;
  double hot_frac_hi;
  double hot_mag_lo;
  double hot_mag_hi;
  double gamma;
  double log_eps;
  double degrade_prob;
  double degrade_scale_lo;
  double degrade_scale_hi;
  /*
   Random crop size; 0 for either disables cropping.
   */
  size_t crop_height;
  size_t crop_width;
} V2vDatasetConfig;

/*
 Item tensor shapes: voxels `voxels x bins x height x width`, frames
 `(voxels + 1) x height x width`.
 */
typedef struct V2vItemShape {
  size_t voxels;
  size_t bins;
  size_t height;
  size_t width;
  size_t voxel_len;
  size_t frame_len;
} V2vItemShape;

/*
 Sensor parameters drawn for one item.
 */
typedef struct V2vParams {
  double c_plus;
  double c_minus;
  double sigma_bg;
  size_t hot_pixel_count;
} V2vParams;

/*
 Fixed sensor for single-voxel conversion.
 */
typedef struct V2vSensorConfig {
  double c_plus;
  double c_minus;
  double sigma_bg;
  double gamma;
  double log_eps;
  /*
   Seeds the initial residual and the noise.
   */
  uint64_t seed;
} V2vSensorConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null if none.
 Valid until the next failing call on the same thread.
 */
const char *v2v_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *v2v_version(void);

/*
 Defaults matching the `v2v simulate` command.
 */
struct V2vDatasetConfig v2v_dataset_config_default(void);

/*
 Open the manifest at `manifest_path` (UTF-8). On success `*out` owns a new
 handle.

 # Safety
 `manifest_path` must be a NUL-terminated string, `config` and `out` valid pointers.
 */
enum V2vStatus v2v_dataset_open(const char *manifest_path,
                                const struct V2vDatasetConfig *config,
                                struct V2vDataset **out);

/*
 Release a handle. Null is ignored.

 # Safety
 `dataset` must be null or a handle from [`v2v_dataset_open`] not yet freed.
 */
void v2v_dataset_free(struct V2vDataset *dataset);

/*
 # Safety
 `dataset` must be a live handle and `out` writable.
 */
enum V2vStatus v2v_dataset_len(const struct V2vDataset *dataset, size_t *out);

/*
 Epoch used by [`v2v_dataset_get_item`].

 # Safety
 `dataset` must be a live handle.
 */
enum V2vStatus v2v_dataset_set_epoch(const struct V2vDataset *dataset, uint64_t epoch);

/*
 # Safety
 `dataset` must be a live handle and `out` writable.
 */
enum V2vStatus v2v_dataset_item_shape(const struct V2vDataset *dataset,
                                      size_t index,
                                      struct V2vItemShape *out);

/*
 Item `index` at an explicit epoch. Voxel counts are written as `f32`,
 frames scaled to `[0, 1]`. `params` may be null.

 # Safety
 `dataset` must be a live handle; `voxels` and `frames` valid for the given
 lengths; `params` null or writable.
 */
enum V2vStatus v2v_dataset_get_item_at(const struct V2vDataset *dataset,
                                       size_t index,
                                       uint64_t epoch,
                                       float *voxels,
                                       size_t voxels_len,
                                       float *frames,
                                       size_t frames_len,
                                       struct V2vParams *params);

/*
 Item `index` at the handle's current epoch; see [`v2v_dataset_get_item_at`].

 # Safety
 Same as [`v2v_dataset_get_item_at`].
 */
enum V2vStatus v2v_dataset_get_item(const struct V2vDataset *dataset,
                                    size_t index,
                                    float *voxels,
                                    size_t voxels_len,
                                    float *frames,
                                    size_t frames_len,
                                    struct V2vParams *params);

/*
 Noise-free defaults with `c_plus = c_minus = 0.2`.
 */
struct V2vSensorConfig v2v_sensor_config_default(void);

/*
 Convert `frame_count` 8-bit frames (row-major, back to back) into one
 discrete voxel of `frame_count - 1` bins, written to `out` as
 `(frame_count - 1) x height x width` counts.

 # Safety
 `frames` must be valid for `frame_count * width * height` reads, `out` for
 `out_len` writes, `config` readable.
 */
enum V2vStatus v2v_frames_to_voxel(const uint8_t *frames,
                                   size_t frame_count,
                                   size_t width,
                                   size_t height,
                                   const struct V2vSensorConfig *config,
                                   int32_t *out,
                                   size_t out_len);

/*
 Bin `count` events with timestamps in `[0, 1]` into a voxel of `bins` bins
 over a `width x height` sensor, written to `out` as `bins x height x width`.
 `interpolated` selects linear weight splitting instead of signed counts.
 Events need not be sorted.

 # Safety
 `t`, `x`, `y`, `p` must be valid for `count` reads and `out` for `out_len` writes.
 */
enum V2vStatus v2v_events_to_voxel(const double *t,
                                   const uint16_t *x,
                                   const uint16_t *y,
                                   const int8_t *p,
                                   size_t count,
                                   size_t width,
                                   size_t height,
                                   size_t bins,
                                   bool interpolated,
                                   float *out,
                                   size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* V2V_H */
