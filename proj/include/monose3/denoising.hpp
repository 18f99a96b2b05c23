#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "monose3/diffusion.hpp"
#include "monose3/robot_chain.hpp"

namespace monose3 {

/// Prediction triplet of the pose denoiser: pixel displacement of the
/// projected origin, relative rotation in 6D form, and a depth ratio.
struct DenoiserOutput {
  Vec2 v_xy = Vec2::Zero();
  Vec6 dr6 = Rotation6D{}.to_vector();
  double v_z = 1.0;
};

/// What a denoiser is conditioned on. Oracles read gt_pose directly; a
/// learned model would only see the keypoints and intrinsics.
struct Observation {
  Pose gt_pose;
  std::vector<std::optional<Vec2>> keypoints_2d;  // empty where behind camera
  CameraIntrinsics intrinsics;
  JointConfig joints;
};

Observation make_observation(const Pose& gt, const CameraIntrinsics& K, const ChainSpec& chain,
                             const JointConfig& joints, double pixel_noise, Rng& rng);

struct TimestepEmbedding {
  std::vector<double> values;
};

/// values[2i] = sin(t / 10000^(2i/c)), values[2i+1] = cos(same).
TimestepEmbedding embed_timestep(double t, int c_emb = 4);

/// Exact update: depth first, then in-plane translation, then R = dR * R_t.
Pose apply_update(const Pose& pose_t, const DenoiserOutput& out, const CameraIntrinsics& K);

/// Targets that make apply_update(pose_t, targets) reproduce pose0.
DenoiserOutput compute_gt_targets(const Pose& pose_t, const Pose& pose0,
                                  const CameraIntrinsics& K);

struct DenoiserSpec {
  enum class Kind { Perfect, Noisy, Biased };

  Kind kind = Kind::Perfect;
  double sigma0 = 0.0;  // Noisy: target noise std at alpha_bar = 0
  double bias = 0.0;    // Biased: pixel offset added to both v_xy components

  static DenoiserSpec perfect() { return {}; }
  static DenoiserSpec noisy(double sigma0) { return {Kind::Noisy, sigma0, 0.0}; }
  static DenoiserSpec biased(double bias) { return {Kind::Biased, 0.0, bias}; }

  /// Parses "perfect", "noisy:<sigma0>" or "biased:<pixels>".
  static DenoiserSpec parse(const std::string& text);
  std::string to_string() const;
};

/// Oracle prediction at conditioning timestep t. The Noisy oracle perturbs
/// each target by sigma0 * sqrt(1 - alpha_bar(t)); v_z is perturbed in log
/// space so it stays positive.
DenoiserOutput predict(const Pose& pose_t, int t, const Observation& obs,
                       const DenoiserSpec& spec, const Schedule& sched, Rng& rng);

Pose denoise(const Pose& pose_t, int t, const Observation& obs, const DenoiserSpec& spec,
             const Schedule& sched, Rng& rng);

/// Mean Euclidean distance between the two transforms applied to `points`.
double point_distance(const Pose& a, const Pose& b, std::span<const Vec3> points);

struct LossTerms {
  double xy = 0.0;
  double rot = 0.0;
  double z = 0.0;
  double total = 0.0;
};

/// Each term swaps one predicted component into the ground-truth targets
/// and measures the resulting pose against pose0.
LossTerms decomposed_loss(const Pose& pose0, const Pose& pose_t, const DenoiserOutput& out,
                          std::span<const Vec3> points, const CameraIntrinsics& K);

}  // namespace monose3
