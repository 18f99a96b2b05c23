#include "monose3/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "monose3/errors.hpp"

namespace monose3 {

double Schedule::sigma_sq(int t, int t_prev) const {
  const double ab_t = alpha_bar_at(t);
  const double ab_prev = alpha_bar_at(t_prev);
  const double eta_sq = eta * eta;
  if (sigma_form == SigmaForm::Standard) {
    if (ab_t >= 1.0) return 0.0;
    return eta_sq * (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev);
  }
  // (1 - ab_prev / ab_t) is negative for t > t_prev; its
  // magnitude is used as the variance.
  if (ab_prev >= 1.0) {
    return eta_sq > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return eta_sq * std::abs(1.0 - ab_prev / ab_t) * (1.0 - ab_t) / (1.0 - ab_prev);
}

Schedule make_linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1 || !(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw Error(ErrorCode::InvalidScheduleParams,
                "linear schedule requires T >= 1 and 0 < beta_start <= beta_end < 1");
  }
  Schedule s;
  s.T = T;
  s.beta.resize(static_cast<std::size_t>(T));
  s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    const double b = beta_start + (beta_end - beta_start) * frac;
    s.beta[static_cast<std::size_t>(t - 1)] = b;
    s.alpha_bar[static_cast<std::size_t>(t)] =
        s.alpha_bar[static_cast<std::size_t>(t - 1)] * (1.0 - b);
  }
  return s;
}

std::vector<int> ddim_timesteps(int T, int steps, std::optional<int> start) {
  const int top = start.value_or(T);
  if (steps < 1 || top < 1 || top > T || steps > top) {
    throw Error(ErrorCode::InvalidRange,
                "DDIM sub-sequence needs 1 <= steps <= start <= T (steps=" +
                    std::to_string(steps) + ", start=" + std::to_string(top) + ")");
  }
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double v = static_cast<double>(top) * (steps - k) / steps;
    ts.push_back(static_cast<int>(std::lround(v)));
  }
  return ts;
}

NoiseScales NoiseScales::from_gamma(double gamma, const NormConfig& cfg) {
  if (!(gamma > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "gamma must be > 0");
  }
  NoiseScales s;
  s.gamma = gamma;
  s.s_rot = 1.0;
  s.s_xy = 0.5 / gamma;
  s.s_z = (cfg.z_max - cfg.z_min) / (2.0 * gamma);
  return s;
}

NoiseScales NoiseScales::unit() {
  NoiseScales s;
  s.s_rot = s.s_xy = s.s_z = 1.0;
  return s;
}

Vec9 NoiseScales::as_vector() const {
  Vec9 v;
  v << s_rot, s_rot, s_rot, s_rot, s_rot, s_rot, s_xy, s_xy, s_z;
  return v;
}

FrustumBox FrustumBox::from_config(const NormConfig& cfg, double margin) {
  if (!(margin >= 0.0 && margin < 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "frustum margin must lie in [0, 0.5)");
  }
  return {0.5 - margin, cfg.z_min - cfg.c_z, cfg.z_max - cfg.c_z};
}

bool FrustumBox::contains(const NormalizedPose& n) const {
  return std::abs(n.tx_n) <= xy_bound && std::abs(n.ty_n) <= xy_bound &&
         n.tz_n >= z_lo && n.tz_n <= z_hi;
}

void FrustumBox::clamp(NormalizedPose& n) const {
  n.tx_n = std::clamp(n.tx_n, -xy_bound, xy_bound);
  n.ty_n = std::clamp(n.ty_n, -xy_bound, xy_bound);
  n.tz_n = std::clamp(n.tz_n, z_lo, z_hi);
}

NormalizedPose forward_noisy(const NormalizedPose& n0, int t, const Schedule& sched,
                             const NoiseScales& scales, const Vec9& eps) {
  const double ab = sched.alpha_bar_at(t);
  const Vec9 v = std::sqrt(ab) * n0.to_vector() +
                 std::sqrt(1.0 - ab) * eps.cwiseProduct(scales.as_vector());
  return NormalizedPose::from_vector(v);
}

namespace {

void check_timestep(int t, const Schedule& sched) {
  if (t < 1 || t > sched.T) {
    throw Error(ErrorCode::InvalidRange, "timestep " + std::to_string(t) +
                                             " outside 1.." + std::to_string(sched.T));
  }
}

Vec9 draw_eps(Rng& rng) {
  Vec9 eps;
  for (int i = 0; i < 9; ++i) eps(i) = standard_normal(rng);
  return eps;
}

}  // namespace

DiffusionSample diffuse_with_noise(const Pose& pose0, int t, const Schedule& sched,
                                   const NoiseScales& scales, const FrustumBox& box,
                                   const CameraIntrinsics& K, const NormConfig& cfg,
                                   const Vec9& eps, BoundMode bound) {
  check_timestep(t, sched);
  const NormalizedPose n0 = normalize(pose0, K, cfg);
  DiffusionSample out{forward_noisy(n0, t, sched, scales, eps), eps, std::nullopt};
  if (bound == BoundMode::Clamp) box.clamp(out.noisy);
  if (out.noisy.tz_n + cfg.c_z > 0.0) out.pose = denormalize(out.noisy, K, cfg);
  return out;
}

DiffusionSample diffuse_sample(const Pose& pose0, int t, const Schedule& sched,
                               const NoiseScales& scales, const FrustumBox& box,
                               const CameraIntrinsics& K, const NormConfig& cfg,
                               Rng& rng, const DiffusionOptions& opts) {
  check_timestep(t, sched);
  const NormalizedPose n0 = normalize(pose0, K, cfg);
  const double ab = sched.alpha_bar_at(t);
  const Vec9 s = scales.as_vector();

  for (int attempt = 0; attempt <= opts.max_degenerate_retries; ++attempt) {
    Vec9 eps = draw_eps(rng);
    NormalizedPose noisy = forward_noisy(n0, t, sched, scales, eps);

    if (opts.bound == BoundMode::Reject) {
      int tries = 0;
      while (!box.contains(noisy)) {
        if (++tries > opts.max_reject_retries) {
          throw Error(ErrorCode::InvalidRange,
                      "rejection sampling exceeded " +
                          std::to_string(opts.max_reject_retries) + " redraws");
        }
        for (int i = 6; i < 9; ++i) eps(i) = standard_normal(rng);
        const Vec9 v = std::sqrt(ab) * n0.to_vector() +
                       std::sqrt(1.0 - ab) * eps.cwiseProduct(s);
        noisy.tx_n = v(6);
        noisy.ty_n = v(7);
        noisy.tz_n = v(8);
      }
    } else if (opts.bound == BoundMode::Clamp) {
      box.clamp(noisy);
    }

    DiffusionSample out{noisy, eps, std::nullopt};
    try {
      if (noisy.tz_n + cfg.c_z <= 0.0) {
        // Only reachable without bounding. The rotation is still checked so
        // degenerate draws are retried the same way in every mode.
        gram_schmidt_6d(Rotation6D::from_vector(noisy.rot6));
        return out;
      }
      out.pose = denormalize(noisy, K, cfg);
      return out;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateRotation6D) throw;
    }
  }
  throw Error(ErrorCode::DegenerateRotation6D,
              "noisy rotation stayed degenerate after " +
                  std::to_string(opts.max_degenerate_retries) + " redraws");
}

Pose diffuse(const Pose& pose0, int t, const Schedule& sched, const NoiseScales& scales,
             const FrustumBox& box, const CameraIntrinsics& K, const NormConfig& cfg,
             Rng& rng, const DiffusionOptions& opts) {
  DiffusionSample s = diffuse_sample(pose0, t, sched, scales, box, K, cfg, rng, opts);
  if (!s.pose) {
    throw Error(ErrorCode::NonPositiveDepth, "unbounded diffusion produced depth <= 0");
  }
  return *s.pose;
}

int sample_timestep(int T, Rng& rng) {
  if (T < 1) throw Error(ErrorCode::InvalidRange, "T must be >= 1");
  return std::uniform_int_distribution<int>(1, T)(rng);
}

}  // namespace monose3
