/*
 * C interface to the monose3 pose-diffusion library.
 *
 * All functions return an ms3_status. On failure a description of the last
 * error on the calling thread is available from ms3_last_error(). Objects
 * are opaque handles created and destroyed in pairs.
 *
 * Pose layout: R is row-major 3x3, t is in meters. A pose maps robot-frame
 * points into the camera frame.
 */
#ifndef MONOSE3_H
#define MONOSE3_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MONOSE3_BUILDING)
#    define MS3_API __declspec(dllexport)
#  else
#    define MS3_API __declspec(dllimport)
#  endif
#else
#  define MS3_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ms3_status {
  MS3_OK = 0,
  MS3_ERR_DEGENERATE_ROTATION = 1,
  MS3_ERR_BEHIND_CAMERA = 2,
  MS3_ERR_NON_POSITIVE_DEPTH = 3,
  MS3_ERR_EMPTY_POINT_SET = 4,
  MS3_ERR_INVALID_SCHEDULE = 5,
  MS3_ERR_INVALID_TIMESTEP_ORDER = 6,
  MS3_ERR_ODD_EMBEDDING_SIZE = 7,
  MS3_ERR_DIMENSION_MISMATCH = 8,
  MS3_ERR_INVALID_ITERATION_COUNT = 9,
  MS3_ERR_INVALID_RANGE = 10,
  MS3_ERR_EMPTY_INPUT = 11,
  MS3_ERR_INVALID_CONFIG = 12,
  MS3_ERR_IO = 13,
  MS3_ERR_NULL_ARGUMENT = 14,
  MS3_ERR_BUFFER_TOO_SMALL = 15,
  MS3_ERR_INTERNAL = 99
} ms3_status;

typedef struct ms3_pose {
  double R[9];
  double t[3];
} ms3_pose;

typedef struct ms3_intrinsics {
  double f;
  double w;
  double h;
  double cx;
  double cy;
} ms3_intrinsics;

/* Depth offset and valid depth range of the normalized coordinates. */
typedef struct ms3_norm_config {
  double c_z;
  double z_min;
  double z_max;
} ms3_norm_config;

typedef struct ms3_schedule ms3_schedule;
typedef struct ms3_run_config ms3_run_config;
typedef struct ms3_run_result ms3_run_result;

MS3_API const char* ms3_version(void);
MS3_API const char* ms3_last_error(void);
MS3_API const char* ms3_status_name(ms3_status status);

/* ---- geometry ---- */

MS3_API ms3_status ms3_gram_schmidt_6d(const double r6[6], double R_out[9]);
MS3_API ms3_status ms3_project_point(const double p[3], const ms3_intrinsics* K,
                                     double uv_out[2]);
MS3_API ms3_status ms3_in_frustum(const ms3_pose* pose, const ms3_intrinsics* K, double margin,
                                  double z_min, double z_max, int* inside_out);

/* 9-vector layout: rot6 (first two columns of R), tx_n, ty_n, tz_n. */
MS3_API ms3_status ms3_normalize(const ms3_pose* pose, const ms3_intrinsics* K,
                                 const ms3_norm_config* cfg, double out9[9]);
MS3_API ms3_status ms3_denormalize(const double n9[9], const ms3_intrinsics* K,
                                   const ms3_norm_config* cfg, ms3_pose* pose_out);

/* ---- schedule and forward diffusion ---- */

MS3_API ms3_status ms3_schedule_create_linear(int steps, double beta_start, double beta_end,
                                              ms3_schedule** out);
MS3_API void ms3_schedule_destroy(ms3_schedule* sched);
MS3_API int ms3_schedule_steps(const ms3_schedule* sched);
MS3_API ms3_status ms3_schedule_alpha_bar(const ms3_schedule* sched, int t, double* out);
/* eta and sigma form (0 = absolute-ratio expression, 1 = standard DDIM) */
MS3_API ms3_status ms3_schedule_set_eta(ms3_schedule* sched, double eta, int sigma_form);

/* Noisy pose at timestep t with the default noise scales (gamma = 3) and the
 * clamped frustum box (margin 0.05). Deterministic in seed. */
MS3_API ms3_status ms3_diffuse(const ms3_schedule* sched, const ms3_pose* pose0, int t,
                               const ms3_intrinsics* K, const ms3_norm_config* cfg,
                               uint64_t seed, ms3_pose* pose_out);

/* Deterministic DDIM step in normalized coordinates. */
MS3_API ms3_status ms3_ddim_step(const ms3_schedule* sched, const double n_t[9],
                                 const double n0_hat[9], int t, int t_prev, double out9[9]);

/* ---- metrics ---- */

MS3_API ms3_status ms3_add_metric(const ms3_pose* gt, const ms3_pose* pred,
                                  const double* points_xyz, size_t n_points, double* out);
/* Linear grid of n_thresholds over [t_min, t_max] meters; result in [0, 100]. */
MS3_API ms3_status ms3_auc(const double* adds, size_t n, double t_min, double t_max,
                           int n_thresholds, double* out);

/* ---- harness ---- */

MS3_API ms3_status ms3_run_config_create(ms3_run_config** out);
MS3_API void ms3_run_config_destroy(ms3_run_config* cfg);
/* Merge a JSON object of config fields. */
MS3_API ms3_status ms3_run_config_merge_json(ms3_run_config* cfg, const char* json_text);
/* Set one field from its string form, e.g. ("ddim-steps", "5"). */
MS3_API ms3_status ms3_run_config_set(ms3_run_config* cfg, const char* key, const char* value);
MS3_API ms3_status ms3_run_config_validate(const ms3_run_config* cfg);
/* Copies the config as JSON into buf. *needed receives the size including
 * the terminating NUL; MS3_ERR_BUFFER_TOO_SMALL if cap is insufficient. */
MS3_API ms3_status ms3_run_config_to_json(const ms3_run_config* cfg, char* buf, size_t cap,
                                          size_t* needed);

/* command: "schedule", "diffuse", "estimate" or "trainsim". Output files are
 * written under the config's out directory. */
MS3_API ms3_status ms3_run(const ms3_run_config* cfg, const char* command, ms3_run_result** out);
MS3_API void ms3_run_result_destroy(ms3_run_result* res);
/* Nonzero when any scenario aborted or an embedded invariant check failed. */
MS3_API int ms3_run_result_exit_code(const ms3_run_result* res);
/* Summary JSON; valid until the result is destroyed. */
MS3_API const char* ms3_run_result_summary(const ms3_run_result* res);
MS3_API size_t ms3_run_result_file_count(const ms3_run_result* res);
MS3_API const char* ms3_run_result_file(const ms3_run_result* res, size_t i);

#ifdef __cplusplus
}
#endif

#endif /* MONOSE3_H */
