#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "monose3/mononorm.hpp"
#include "monose3/rng.hpp"
#include "monose3/robot_chain.hpp"

namespace monose3 {

/// Mean distance between keypoints posed by gt and by pred.
double add_metric(const Pose& gt, const Pose& pred, std::span<const Vec3> keypoints);

/// Success-rate curve integration rule: linear threshold grid, inclusive.
struct AucGrid {
  double t_min = 1e-5;  // 0.01 mm
  double t_max = 0.1;   // 100 mm
  int n_thresholds = 2000;
};

/// 100 x mean over the grid of the fraction of adds <= threshold.
double auc(std::span<const double> adds, const AucGrid& grid = {});

struct ScenarioRanges {
  double f_min = 400.0;
  double f_max = 900.0;
  std::vector<std::pair<double, double>> image_sizes = {{640.0, 480.0}, {1280.0, 720.0}};
  double margin = 0.05;
  double pixel_noise = 0.0;

  void validate() const;
};

struct Scenario {
  std::uint64_t index = 0;
  CameraIntrinsics intrinsics;
  JointConfig joints;
  Pose gt_pose;
  double pixel_noise = 0.0;
};

struct ScenarioSet {
  std::uint64_t seed = 0;
  std::vector<Scenario> scenarios;
};

/// Scenario i depends only on (seed, i).
Scenario generate_scenario(std::uint64_t seed, std::uint64_t index, const ScenarioRanges& ranges,
                           const ChainSpec& chain, const NormConfig& cfg);

ScenarioSet generate_scenarios(std::uint64_t seed, int count, const ScenarioRanges& ranges,
                               const ChainSpec& chain, const NormConfig& cfg);

/// Uniform rotation via a Gaussian 6D vector and Gram-Schmidt.
Mat3 random_rotation(Rng& rng);

}  // namespace monose3
