#include "monose3/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "monose3/diffusion.hpp"
#include "monose3/errors.hpp"
#include "monose3/rng.hpp"

namespace monose3 {

double add_metric(const Pose& gt, const Pose& pred, std::span<const Vec3> keypoints) {
  if (keypoints.empty()) throw Error(ErrorCode::EmptyPointSet, "ADD needs keypoints");
  double sum = 0.0;
  for (const Vec3& k : keypoints) sum += (gt.apply(k) - pred.apply(k)).norm();
  return sum / static_cast<double>(keypoints.size());
}

double auc(std::span<const double> adds, const AucGrid& grid) {
  if (adds.empty()) throw Error(ErrorCode::EmptyInput, "AUC needs at least one ADD value");
  if (grid.n_thresholds < 2 || !(grid.t_min >= 0.0) || !(grid.t_min < grid.t_max)) {
    throw Error(ErrorCode::InvalidRange, "AUC grid needs n >= 2 and 0 <= t_min < t_max");
  }
  std::vector<double> sorted(adds.begin(), adds.end());
  std::sort(sorted.begin(), sorted.end());
  const double step = (grid.t_max - grid.t_min) / (grid.n_thresholds - 1);
  double acc = 0.0;
  for (int k = 0; k < grid.n_thresholds; ++k) {
    const double thr = grid.t_min + step * k;
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), thr) - sorted.begin();
    acc += static_cast<double>(below) / static_cast<double>(sorted.size());
  }
  return 100.0 * acc / grid.n_thresholds;
}

void ScenarioRanges::validate() const {
  if (!(f_min > 0.0 && f_min <= f_max)) {
    throw Error(ErrorCode::InvalidRange, "focal range must satisfy 0 < f_min <= f_max");
  }
  if (image_sizes.empty()) throw Error(ErrorCode::InvalidRange, "no image sizes configured");
  for (const auto& [w, h] : image_sizes) {
    if (!(w > 0.0 && h > 0.0)) throw Error(ErrorCode::InvalidRange, "image sizes must be > 0");
  }
  if (!(margin >= 0.0 && margin < 0.5)) {
    throw Error(ErrorCode::InvalidRange, "margin must lie in [0, 0.5)");
  }
  if (!(pixel_noise >= 0.0)) throw Error(ErrorCode::InvalidRange, "pixel noise must be >= 0");
}

Mat3 random_rotation(Rng& rng) {
  for (;;) {
    Vec6 v;
    for (int i = 0; i < 6; ++i) v(i) = standard_normal(rng);
    try {
      return gram_schmidt_6d(Rotation6D::from_vector(v));
    } catch (const Error&) {
      // measure-zero draw; take another
    }
  }
}

Scenario generate_scenario(std::uint64_t seed, std::uint64_t index, const ScenarioRanges& ranges,
                           const ChainSpec& chain, const NormConfig& cfg) {
  Rng rng = make_rng(seed, Stream::Scenario, index);
  Scenario s;
  s.index = index;
  s.pixel_noise = ranges.pixel_noise;

  const double f = std::uniform_real_distribution<double>(ranges.f_min, ranges.f_max)(rng);
  const auto size_idx = std::uniform_int_distribution<std::size_t>(
      0, ranges.image_sizes.size() - 1)(rng);
  const auto [w, h] = ranges.image_sizes[size_idx];
  s.intrinsics = CameraIntrinsics::centered(f, w, h);

  const FrustumBox box = FrustumBox::from_config(cfg, ranges.margin);
  NormalizedPose n;
  n.tx_n = std::uniform_real_distribution<double>(-box.xy_bound, box.xy_bound)(rng);
  n.ty_n = std::uniform_real_distribution<double>(-box.xy_bound, box.xy_bound)(rng);
  n.tz_n = std::uniform_real_distribution<double>(box.z_lo, box.z_hi)(rng);
  n.rot6 = Rotation6D::from_matrix(random_rotation(rng)).to_vector();
  s.gt_pose = denormalize(n, s.intrinsics, cfg);

  std::uniform_real_distribution<double> joint(-chain.joint_limit, chain.joint_limit);
  s.joints.angles.resize(static_cast<std::size_t>(chain.n_joints()));
  for (double& a : s.joints.angles) a = joint(rng);
  return s;
}

ScenarioSet generate_scenarios(std::uint64_t seed, int count, const ScenarioRanges& ranges,
                               const ChainSpec& chain, const NormConfig& cfg) {
  if (count < 1) throw Error(ErrorCode::InvalidRange, "scenario count must be >= 1");
  ranges.validate();
  chain.validate();
  cfg.validate();
  ScenarioSet set;
  set.seed = seed;
  set.scenarios.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    set.scenarios.push_back(
        generate_scenario(seed, static_cast<std::uint64_t>(i), ranges, chain, cfg));
  }
  return set;
}

}  // namespace monose3
