#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "monose3/se3_camera.hpp"

namespace monose3 {

/// Serial chain of revolute joints. Joint i sits at keypoint i and link i
/// runs from keypoint i to keypoint i+1 along `extension_axis` expressed in
/// the frame after joints 0..i.
struct ChainSpec {
  std::vector<double> link_lengths;
  std::vector<Vec3> joint_axes;
  Vec3 extension_axis = Vec3::UnitZ();
  double joint_limit = 3.141592653589793;

  int n_joints() const { return static_cast<int>(link_lengths.size()); }

  /// Seven links sized like a tabletop arm, axes alternating z / y.
  static ChainSpec franka_like();
  static ChainSpec from_json(const std::string& text);
  static ChainSpec load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

struct JointConfig {
  std::vector<double> angles;
};

/// n+1 keypoints in the robot base frame, keypoint 0 at the origin.
std::vector<Vec3> forward_kinematics(const ChainSpec& spec, const JointConfig& j);

/// Keypoints interleaved with `per_link` evenly spaced interior points on
/// each link (fractions k/(per_link+1)). Size n*per_link + n + 1.
std::vector<Vec3> sample_points(const ChainSpec& spec, const JointConfig& j, int per_link);

/// Point set for the pose loss: the keypoints plus `count` points spread
/// evenly by arc length over the whole chain.
std::vector<Vec3> loss_points(const ChainSpec& spec, const JointConfig& j, int count = 64);

}  // namespace monose3
