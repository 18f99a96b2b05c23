#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "monose3/denoising.hpp"

namespace monose3 {

enum class InitMode { Canonical, PriorSample, PreviousEstimate };

struct ReverseConfig {
  int ddim_steps = 5;
  int refine_steps = 5;
  /// Top of the DDIM sub-sequence; T when unset.
  std::optional<int> start_timestep;
  /// Conditioning timestep for the refinement tail and direct regression.
  int refine_timestep = 1;
  InitMode init_mode = InitMode::Canonical;
  Mat3 canonical_rotation = Mat3::Identity();
  std::optional<Pose> previous;

  void validate(const Schedule& sched) const;
};

enum class Phase { Ddim, Refine };

struct TrajectoryStep {
  Phase phase = Phase::Ddim;
  int t = 0;       // conditioning timestep given to the denoiser
  int t_prev = 0;  // DDIM target timestep; equals t for refinement
  Pose pose_in;
  Pose predicted;
  Pose pose_out;
  std::optional<double> add;  // of pose_out, when ground truth is known
  bool coef_clamped = false;
  std::optional<CropRect> crop;
};

/// Ordered steps; the DDIM part has strictly decreasing t.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
};

struct ReverseResult {
  Pose pose;
  Trajectory trajectory;
  int clamp_events = 0;
};

/// eps implied by predicting n0_hat from n_t at timestep t.
Vec9 predicted_noise(const NormalizedPose& n_t, const NormalizedPose& n0_hat, int t,
                     const Schedule& sched);

struct DdimCoefficients {
  double signal = 1.0;  // sqrt(alpha_bar(t_prev))
  double noise = 0.0;   // sqrt(max(0, 1 - alpha_bar(t_prev) - sigma^2))
  bool clamped = false; // radicand was negative
};

DdimCoefficients ddim_coefficients(const Schedule& sched, int t, int t_prev);

/// Deterministic DDIM update from t to t_prev (no sigma * z term).
NormalizedPose ddim_step(const NormalizedPose& n_t, const NormalizedPose& n0_hat, int t,
                         int t_prev, const Schedule& sched, bool* clamped = nullptr);

/// Initial pose for the reverse loop according to rcfg.init_mode.
Pose initial_pose(const ReverseConfig& rcfg, const NoiseScales& scales, const FrustumBox& box,
                  const CameraIntrinsics& K, const NormConfig& cfg, Rng& rng);

/// DDIM loop over the sub-sequence followed by the refinement tail.
ReverseResult run_reverse(const Observation& obs, const ChainSpec& chain, const NormConfig& cfg,
                          const Schedule& sched, const NoiseScales& scales,
                          const FrustumBox& box, const ReverseConfig& rcfg,
                          const DenoiserSpec& denoiser, Rng& rng);

/// Baseline: `iterations` plain denoiser applications at the refinement
/// timestep, starting from rcfg's initial pose.
ReverseResult run_direct_regression(const Observation& obs, const ChainSpec& chain,
                                    const NormConfig& cfg, const Schedule& sched,
                                    const NoiseScales& scales, const FrustumBox& box,
                                    const ReverseConfig& rcfg, int iterations,
                                    const DenoiserSpec& denoiser, Rng& rng);

/// One row per step: t, R row-major (9), t (3), ADD.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool header = true);

}  // namespace monose3
