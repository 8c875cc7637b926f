/* lanekit C API: camera geometry, focal self-calibration and lane evaluation. */

#ifndef LANEKIT_H
#define LANEKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum LkStatus {
  /**
   * Success.
   */
  LK_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LK_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was out of its documented domain.
   */
  LK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * An input file or string failed to parse.
   */
  LK_STATUS_PARSE_ERROR = 3,
  /**
   * A file could not be read.
   */
  LK_STATUS_IO_ERROR = 4,
  /**
   * The point is behind the camera and has no projection.
   */
  LK_STATUS_BEHIND_CAMERA = 5,
  /**
   * The lane has no visible points; the matching cost is undefined.
   */
  LK_STATUS_UNMATCHABLE = 6,
  /**
   * Every observation was filtered out; the segment cannot be fitted.
   */
  LK_STATUS_UNINFORMATIVE_SEGMENT = 7,
  /**
   * No prediction frame id matches any ground-truth frame id.
   */
  LK_STATUS_EMPTY_OVERLAP = 8,
  /**
   * An unexpected internal failure.
   */
  LK_STATUS_INTERNAL_ERROR = 9,
} LkStatus;

/**
 * Opaque pinhole camera handle.
 */
typedef struct LkCamera LkCamera;

/**
 * Result of a per-segment focal fit.
 */
typedef struct LkFitResult {
  /**
   * Fitted focal length, pixels.
   */
  double f_fit;
  /**
   * Hinge objective value at the fitted focal.
   */
  double objective_value;
  /**
   * Observations that survived the rotation filter.
   */
  uintptr_t used_count;
  /**
   * Observations dropped by the rotation filter.
   */
  uintptr_t filtered_count;
  /**
   * Search interval actually used.
   */
  double search_lo;
  double search_hi;
} LkFitResult;

/**
 * Aggregated evaluation report. Metrics that are undefined without true
 * positives (category accuracy, x/z errors) are NaN.
 */
typedef struct LkEvalReport {
  double f1;
  double precision;
  double recall;
  double category_accuracy;
  double x_near;
  double x_far;
  double z_near;
  double z_far;
  uintptr_t true_positives;
  uintptr_t false_positives;
  uintptr_t false_negatives;
  uintptr_t frames;
} LkEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static C string.
 */
const char *lk_version(void);

/**
 * Create a camera: pinhole intrinsics, image size and extrinsics built from
 * the camera height above the ground and its pitch/roll/yaw (radians,
 * positive pitch tilts toward the ground). The handle must be released with
 * `lk_camera_destroy`.
 *
 * # Safety
 * `out_camera` must be a valid pointer.
 */
enum LkStatus lk_camera_create(double fx,
                               double fy,
                               double cx,
                               double cy,
                               uint32_t width,
                               uint32_t height,
                               double camera_height,
                               double pitch,
                               double roll,
                               double yaw,
                               struct LkCamera **out_camera);

/**
 * Release a camera handle. Null is a no-op.
 *
 * # Safety
 * `camera` must have come from `lk_camera_create` and not been freed.
 */
void lk_camera_destroy(struct LkCamera *camera);

/**
 * Project an ego-frame point (meters, length-3 array) to normalized image
 * coordinates plus camera depth, written as `[u, v, depth]`.
 *
 * # Safety
 * `camera`, `point_ego` (3 doubles) and `out_uvd` (3 doubles) must be valid.
 */
enum LkStatus lk_camera_project(const struct LkCamera *camera,
                                const double *point_ego,
                                double *out_uvd);

/**
 * Back-project pixel coordinates and a camera-frame depth (meters) into the
 * ego frame, written as `[x, y, z]`.
 *
 * # Safety
 * `camera` and `out_ego` (3 doubles) must be valid.
 */
enum LkStatus lk_camera_backproject(const struct LkCamera *camera,
                                    double u,
                                    double v,
                                    double depth,
                                    double *out_ego);

/**
 * Theoretical envelope `2 f^2 / (W^2 r_z)` on the deviation of a learned
 * focal length. Returns infinity for zero rotation and NaN for invalid
 * arguments.
 */
double lk_focal_bound(double f, uint32_t width, double r_z);

/**
 * Hinge objective `sum_i relu(|f - f_hat_i| - 2 f^2/(W^2 r_z_i))` over
 * per-frame observation arrays of length `len`.
 *
 * # Safety
 * `r_z` and `f_hat` must point to `len` doubles; `out_objective` must be
 * valid.
 */
enum LkStatus lk_hinge_objective(double f,
                                 const double *r_z,
                                 const double *f_hat,
                                 uintptr_t len,
                                 uint32_t width,
                                 double *out_objective);

/**
 * Fit a segment's focal length: drop frames with rotation below `rz_min`,
 * then return the smallest focal in the search interval minimizing the
 * hinge objective. Pass `search_lo <= 0` or `search_hi <= 0` to use the
 * default interval `[0.5 median f_hat, 2 median f_hat]`.
 *
 * # Safety
 * `r_z` and `f_hat` must point to `len` doubles; `out` must be valid.
 */
enum LkStatus lk_fit_segment_focal(const double *r_z,
                                   const double *f_hat,
                                   uintptr_t len,
                                   uint32_t width,
                                   double rz_min,
                                   double search_lo,
                                   double search_hi,
                                   struct LkFitResult *out);

/**
 * Visibility-weighted mean point distance between a ground-truth lane and
 * an anchor, both sampled at the same `len` forward steps. Writes infinity
 * and returns `Unmatchable` when the lane has zero total visibility.
 *
 * # Safety
 * All arrays must point to `len` doubles; `out_cost` must be valid.
 */
enum LkStatus lk_matching_cost(uintptr_t len,
                               const double *gt_x,
                               const double *gt_z,
                               const double *gt_visibility,
                               const double *anchor_x,
                               const double *anchor_z,
                               double *out_cost);

/**
 * Evaluate a predictions file (JSON Lines) against a directory of
 * annotation JSONs and fill the report. `config_json` may be null for the
 * protocol defaults, or hold the same JSON the `--config` flag of the CLI
 * accepts.
 *
 * # Safety
 * `gt_dir` and `pred_file` must be valid C strings; `out_report` must be a
 * valid pointer; `config_json` may be null.
 */
enum LkStatus lk_evaluate_files(const char *gt_dir,
                                const char *pred_file,
                                const char *config_json,
                                struct LkEvalReport *out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANEKIT_H */
