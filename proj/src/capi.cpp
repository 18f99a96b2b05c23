#include "monose3/monose3.h"

#include <cstring>
#include <exception>
#include <string>
#include <vector>

#include "monose3/diffusion.hpp"
#include "monose3/errors.hpp"
#include "monose3/harness.hpp"
#include "monose3/metrics.hpp"
#include "monose3/reverse.hpp"

struct ms3_schedule {
  monose3::Schedule impl;
};

struct ms3_run_config {
  monose3::RunConfig impl;
};

struct ms3_run_result {
  int exit_code = 0;
  std::string summary;
  std::vector<std::string> files;
};

namespace {

thread_local std::string g_last_error;

ms3_status to_status(monose3::ErrorCode code) {
  using monose3::ErrorCode;
  switch (code) {
    case ErrorCode::DegenerateRotation6D: return MS3_ERR_DEGENERATE_ROTATION;
    case ErrorCode::BehindCamera: return MS3_ERR_BEHIND_CAMERA;
    case ErrorCode::NonPositiveDepth: return MS3_ERR_NON_POSITIVE_DEPTH;
    case ErrorCode::EmptyPointSet: return MS3_ERR_EMPTY_POINT_SET;
    case ErrorCode::InvalidScheduleParams: return MS3_ERR_INVALID_SCHEDULE;
    case ErrorCode::InvalidTimestepOrder: return MS3_ERR_INVALID_TIMESTEP_ORDER;
    case ErrorCode::OddEmbeddingSize: return MS3_ERR_ODD_EMBEDDING_SIZE;
    case ErrorCode::DimensionMismatch: return MS3_ERR_DIMENSION_MISMATCH;
    case ErrorCode::InvalidIterationCount: return MS3_ERR_INVALID_ITERATION_COUNT;
    case ErrorCode::InvalidRange: return MS3_ERR_INVALID_RANGE;
    case ErrorCode::EmptyInput: return MS3_ERR_EMPTY_INPUT;
    case ErrorCode::InvalidConfig: return MS3_ERR_INVALID_CONFIG;
    case ErrorCode::Io: return MS3_ERR_IO;
  }
  return MS3_ERR_INTERNAL;
}

template <typename Fn>
ms3_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MS3_OK;
  } catch (const monose3::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return MS3_ERR_INVALID_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MS3_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return MS3_ERR_INTERNAL;
  }
}

ms3_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return MS3_ERR_NULL_ARGUMENT;
}

monose3::Pose from_c(const ms3_pose& p) {
  monose3::Pose out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.R(r, c) = p.R[3 * r + c];
  }
  out.t = {p.t[0], p.t[1], p.t[2]};
  return out;
}

void to_c(const monose3::Pose& p, ms3_pose& out) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.R[3 * r + c] = p.R(r, c);
  }
  for (int i = 0; i < 3; ++i) out.t[i] = p.t(i);
}

monose3::CameraIntrinsics from_c(const ms3_intrinsics& k) {
  return {k.f, k.w, k.h, k.cx, k.cy};
}

monose3::NormConfig from_c(const ms3_norm_config& c) { return {c.c_z, c.z_min, c.z_max}; }

monose3::Vec9 vec9(const double* v) {
  monose3::Vec9 out;
  for (int i = 0; i < 9; ++i) out(i) = v[i];
  return out;
}

}  // namespace

extern "C" {

const char* ms3_version(void) { return monose3::kVersion; }

const char* ms3_last_error(void) { return g_last_error.c_str(); }

const char* ms3_status_name(ms3_status status) {
  switch (status) {
    case MS3_OK: return "OK";
    case MS3_ERR_DEGENERATE_ROTATION: return "DegenerateRotation6D";
    case MS3_ERR_BEHIND_CAMERA: return "BehindCamera";
    case MS3_ERR_NON_POSITIVE_DEPTH: return "NonPositiveDepth";
    case MS3_ERR_EMPTY_POINT_SET: return "EmptyPointSet";
    case MS3_ERR_INVALID_SCHEDULE: return "InvalidScheduleParams";
    case MS3_ERR_INVALID_TIMESTEP_ORDER: return "InvalidTimestepOrder";
    case MS3_ERR_ODD_EMBEDDING_SIZE: return "OddEmbeddingSize";
    case MS3_ERR_DIMENSION_MISMATCH: return "DimensionMismatch";
    case MS3_ERR_INVALID_ITERATION_COUNT: return "InvalidIterationCount";
    case MS3_ERR_INVALID_RANGE: return "InvalidRange";
    case MS3_ERR_EMPTY_INPUT: return "EmptyInput";
    case MS3_ERR_INVALID_CONFIG: return "InvalidConfig";
    case MS3_ERR_IO: return "Io";
    case MS3_ERR_NULL_ARGUMENT: return "NullArgument";
    case MS3_ERR_BUFFER_TOO_SMALL: return "BufferTooSmall";
    case MS3_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

ms3_status ms3_gram_schmidt_6d(const double r6[6], double R_out[9]) {
  if (!r6 || !R_out) return null_arg("r6/R_out");
  return guarded([&] {
    monose3::Vec6 v;
    for (int i = 0; i < 6; ++i) v(i) = r6[i];
    const monose3::Mat3 R = monose3::gram_schmidt_6d(monose3::Rotation6D::from_vector(v));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) R_out[3 * r + c] = R(r, c);
    }
  });
}

ms3_status ms3_project_point(const double p[3], const ms3_intrinsics* K, double uv_out[2]) {
  if (!p || !K || !uv_out) return null_arg("p/K/uv_out");
  return guarded([&] {
    const monose3::Vec2 uv = monose3::project_point({p[0], p[1], p[2]}, from_c(*K));
    uv_out[0] = uv.x();
    uv_out[1] = uv.y();
  });
}

ms3_status ms3_in_frustum(const ms3_pose* pose, const ms3_intrinsics* K, double margin,
                          double z_min, double z_max, int* inside_out) {
  if (!pose || !K || !inside_out) return null_arg("pose/K/inside_out");
  return guarded([&] {
    *inside_out = monose3::in_frustum(from_c(*pose), from_c(*K), margin, {z_min, z_max}) ? 1 : 0;
  });
}

ms3_status ms3_normalize(const ms3_pose* pose, const ms3_intrinsics* K,
                         const ms3_norm_config* cfg, double out9[9]) {
  if (!pose || !K || !cfg || !out9) return null_arg("pose/K/cfg/out9");
  return guarded([&] {
    const monose3::Vec9 v = monose3::normalize(from_c(*pose), from_c(*K), from_c(*cfg)).to_vector();
    for (int i = 0; i < 9; ++i) out9[i] = v(i);
  });
}

ms3_status ms3_denormalize(const double n9[9], const ms3_intrinsics* K,
                           const ms3_norm_config* cfg, ms3_pose* pose_out) {
  if (!n9 || !K || !cfg || !pose_out) return null_arg("n9/K/cfg/pose_out");
  return guarded([&] {
    const auto n = monose3::NormalizedPose::from_vector(vec9(n9));
    to_c(monose3::denormalize(n, from_c(*K), from_c(*cfg)), *pose_out);
  });
}

ms3_status ms3_schedule_create_linear(int steps, double beta_start, double beta_end,
                                      ms3_schedule** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    *out = new ms3_schedule{monose3::make_linear_schedule(steps, beta_start, beta_end)};
  });
}

void ms3_schedule_destroy(ms3_schedule* sched) { delete sched; }

int ms3_schedule_steps(const ms3_schedule* sched) { return sched ? sched->impl.T : 0; }

ms3_status ms3_schedule_alpha_bar(const ms3_schedule* sched, int t, double* out) {
  if (!sched || !out) return null_arg("sched/out");
  if (t < 0 || t > sched->impl.T) {
    g_last_error = "timestep out of range";
    return MS3_ERR_INVALID_RANGE;
  }
  *out = sched->impl.alpha_bar_at(t);
  g_last_error.clear();
  return MS3_OK;
}

ms3_status ms3_schedule_set_eta(ms3_schedule* sched, double eta, int sigma_form) {
  if (!sched) return null_arg("sched");
  if (!(eta >= 0.0) || (sigma_form != 0 && sigma_form != 1)) {
    g_last_error = "eta must be >= 0 and sigma_form 0 or 1";
    return MS3_ERR_INVALID_CONFIG;
  }
  sched->impl.eta = eta;
  sched->impl.sigma_form = sigma_form == 0 ? monose3::SigmaForm::Absolute : monose3::SigmaForm::Standard;
  g_last_error.clear();
  return MS3_OK;
}

ms3_status ms3_diffuse(const ms3_schedule* sched, const ms3_pose* pose0, int t,
                       const ms3_intrinsics* K, const ms3_norm_config* cfg, uint64_t seed,
                       ms3_pose* pose_out) {
  if (!sched || !pose0 || !K || !cfg || !pose_out) return null_arg("diffuse arguments");
  return guarded([&] {
    const monose3::NormConfig norm = from_c(*cfg);
    norm.validate();
    monose3::Rng rng(seed);
    const monose3::Pose p = monose3::diffuse(
        from_c(*pose0), t, sched->impl, monose3::NoiseScales::from_gamma(3.0, norm),
        monose3::FrustumBox::from_config(norm), from_c(*K), norm, rng);
    to_c(p, *pose_out);
  });
}

ms3_status ms3_ddim_step(const ms3_schedule* sched, const double n_t[9], const double n0_hat[9],
                         int t, int t_prev, double out9[9]) {
  if (!sched || !n_t || !n0_hat || !out9) return null_arg("ddim arguments");
  return guarded([&] {
    const auto out = monose3::ddim_step(monose3::NormalizedPose::from_vector(vec9(n_t)),
                                        monose3::NormalizedPose::from_vector(vec9(n0_hat)), t,
                                        t_prev, sched->impl);
    const monose3::Vec9 v = out.to_vector();
    for (int i = 0; i < 9; ++i) out9[i] = v(i);
  });
}

ms3_status ms3_add_metric(const ms3_pose* gt, const ms3_pose* pred, const double* points_xyz,
                          size_t n_points, double* out) {
  if (!gt || !pred || !out || (n_points > 0 && !points_xyz)) return null_arg("add arguments");
  return guarded([&] {
    std::vector<monose3::Vec3> pts;
    pts.reserve(n_points);
    for (size_t i = 0; i < n_points; ++i) {
      pts.emplace_back(points_xyz[3 * i], points_xyz[3 * i + 1], points_xyz[3 * i + 2]);
    }
    *out = monose3::add_metric(from_c(*gt), from_c(*pred), pts);
  });
}

ms3_status ms3_auc(const double* adds, size_t n, double t_min, double t_max, int n_thresholds,
                   double* out) {
  if (!out || (n > 0 && !adds)) return null_arg("adds/out");
  return guarded([&] {
    *out = monose3::auc(std::span<const double>(adds, n), {t_min, t_max, n_thresholds});
  });
}

ms3_status ms3_run_config_create(ms3_run_config** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new ms3_run_config{}; });
}

void ms3_run_config_destroy(ms3_run_config* cfg) { delete cfg; }

ms3_status ms3_run_config_merge_json(ms3_run_config* cfg, const char* json_text) {
  if (!cfg || !json_text) return null_arg("cfg/json_text");
  return guarded([&] { cfg->impl.merge_json(nlohmann::json::parse(json_text)); });
}

ms3_status ms3_run_config_set(ms3_run_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return null_arg("cfg/key/value");
  return guarded([&] { cfg->impl.set(key, value); });
}

ms3_status ms3_run_config_validate(const ms3_run_config* cfg) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] { cfg->impl.validate(); });
}

ms3_status ms3_run_config_to_json(const ms3_run_config* cfg, char* buf, size_t cap,
                                  size_t* needed) {
  if (!cfg) return null_arg("cfg");
  std::string text;
  const ms3_status st = guarded([&] { text = cfg->impl.to_json().dump(); });
  if (st != MS3_OK) return st;
  if (needed) *needed = text.size() + 1;
  if (!buf || cap < text.size() + 1) {
    g_last_error = "buffer too small";
    return MS3_ERR_BUFFER_TOO_SMALL;
  }
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return MS3_OK;
}

ms3_status ms3_run(const ms3_run_config* cfg, const char* command, ms3_run_result** out) {
  if (!cfg || !command || !out) return null_arg("cfg/command/out");
  *out = nullptr;
  return guarded([&] {
    monose3::CommandResult r = monose3::run_command(cfg->impl, command);
    auto* res = new ms3_run_result;
    res->exit_code = r.exit_code;
    res->summary = r.summary.dump(2);
    for (const auto& f : r.files) res->files.push_back(f.string());
    *out = res;
  });
}

void ms3_run_result_destroy(ms3_run_result* res) { delete res; }

int ms3_run_result_exit_code(const ms3_run_result* res) { return res ? res->exit_code : 1; }

const char* ms3_run_result_summary(const ms3_run_result* res) {
  return res ? res->summary.c_str() : "";
}

size_t ms3_run_result_file_count(const ms3_run_result* res) { return res ? res->files.size() : 0; }

const char* ms3_run_result_file(const ms3_run_result* res, size_t i) {
  if (!res || i >= res->files.size()) return nullptr;
  return res->files[i].c_str();
}

}  // extern "C"
