#pragma once

#include <optional>
#include <vector>

#include "monose3/mononorm.hpp"
#include "monose3/rng.hpp"

namespace monose3 {

/// Variance of the reverse step. Absolute uses eta^2 |1 - ab_prev/ab_t| times
/// (1 - ab_t)/(1 - ab_prev), Standard the usual DDIM posterior variance.
enum class SigmaForm { Absolute, Standard };

/// Linear-beta noise schedule with 1-based timesteps; alpha_bar(0) == 1.
struct Schedule {
  int T = 0;
  std::vector<double> beta;       // beta[t-1] for t = 1..T
  std::vector<double> alpha_bar;  // alpha_bar[t] for t = 0..T
  double eta = 1.0;
  SigmaForm sigma_form = SigmaForm::Absolute;

  double beta_at(int t) const { return beta.at(static_cast<std::size_t>(t - 1)); }
  double alpha_bar_at(int t) const { return alpha_bar.at(static_cast<std::size_t>(t)); }

  /// Reverse-step variance for t -> t_prev. Returns +inf for the Absolute form
  /// when alpha_bar(t_prev) == 1 (the step coefficient is then zero anyway).
  double sigma_sq(int t, int t_prev) const;
};

Schedule make_linear_schedule(int T, double beta_start, double beta_end);

/// Evenly spaced DDIM timesteps, descending from `start` (default T), e.g.
/// {100, 80, 60, 40, 20} for 5 steps over T = 100. The step after the last
/// entry goes to 0.
std::vector<int> ddim_timesteps(int T, int steps, std::optional<int> start = std::nullopt);

struct NoiseScales {
  double gamma = 3.0;
  double s_rot = 1.0;
  double s_xy = 0.5 / 3.0;
  double s_z = (3.0 - 0.3) / (2.0 * 3.0);

  /// Translation scales sized so that gamma standard deviations span the
  /// visible half-range of the normalized box.
  static NoiseScales from_gamma(double gamma, const NormConfig& cfg);
  static NoiseScales unit();
  Vec9 as_vector() const;
};

struct FrustumBox {
  double xy_bound = 0.45;
  double z_lo = 0.3 - 1.5;
  double z_hi = 3.0 - 1.5;

  static FrustumBox from_config(const NormConfig& cfg, double margin = 0.05);
  bool contains(const NormalizedPose& n) const;
  void clamp(NormalizedPose& n) const;
};

/// How translation noise that leaves the frustum box is handled.
enum class BoundMode { Clamp, Reject, None };

struct DiffusionOptions {
  BoundMode bound = BoundMode::Clamp;
  int max_degenerate_retries = 16;
  int max_reject_retries = 1000;
};

struct DiffusionSample {
  NormalizedPose noisy;  // after bounding, before Gram-Schmidt
  Vec9 eps;              // the standard-normal draw that produced it
  std::optional<Pose> pose;  // empty only when BoundMode::None left tz <= 0
};

/// Closed-form forward step in normalized space for a given noise draw.
/// No bounding is applied.
NormalizedPose forward_noisy(const NormalizedPose& n0, int t, const Schedule& sched,
                             const NoiseScales& scales, const Vec9& eps);

/// Draws a noisy pose at timestep t. With bounding on, the returned pose is
/// in the frustum. Degenerate rotations trigger a redraw of eps.
DiffusionSample diffuse_sample(const Pose& pose0, int t, const Schedule& sched,
                               const NoiseScales& scales, const FrustumBox& box,
                               const CameraIntrinsics& K, const NormConfig& cfg,
                               Rng& rng, const DiffusionOptions& opts = {});

Pose diffuse(const Pose& pose0, int t, const Schedule& sched, const NoiseScales& scales,
             const FrustumBox& box, const CameraIntrinsics& K, const NormConfig& cfg,
             Rng& rng, const DiffusionOptions& opts = {});

/// Deterministic variant used by tests: the caller supplies eps.
DiffusionSample diffuse_with_noise(const Pose& pose0, int t, const Schedule& sched,
                                   const NoiseScales& scales, const FrustumBox& box,
                                   const CameraIntrinsics& K, const NormConfig& cfg,
                                   const Vec9& eps, BoundMode bound = BoundMode::Clamp);

/// Uniform over {1..T}.
int sample_timestep(int T, Rng& rng);

}  // namespace monose3
