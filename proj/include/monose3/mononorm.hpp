#pragma once

#include "monose3/se3_camera.hpp"

namespace monose3 {

using Vec9 = Eigen::Matrix<double, 9, 1>;

/// Intrinsics-invariant pose coordinates: the first two rotation columns,
/// the image-plane translation scaled by f/(w tz) and f/(h tz), and the
/// depth offset tz - c_z. Arbitrary reals are legal once noise is applied.
struct NormalizedPose {
  Vec6 rot6 = Rotation6D{}.to_vector();
  double tx_n = 0.0;
  double ty_n = 0.0;
  double tz_n = 0.0;

  /// Layout: rot6 (6), tx_n, ty_n, tz_n.
  Vec9 to_vector() const;
  static NormalizedPose from_vector(const Vec9& v);
  Vec3 translation() const { return {tx_n, ty_n, tz_n}; }
};

struct NormConfig {
  double c_z = 1.5;
  double z_min = 0.3;
  double z_max = 3.0;

  DepthRange depth_range() const { return {z_min, z_max}; }
  /// Throws InvalidConfig unless 0 < z_min < c_z < z_max.
  void validate() const;
};

NormalizedPose normalize(const Pose& pose, const CameraIntrinsics& K,
                         const NormConfig& cfg);

/// Depth is recovered first, the in-plane translation is scaled by it, and
/// the orientation comes from gram_schmidt_6d.
Pose denormalize(const NormalizedPose& n, const CameraIntrinsics& K,
                 const NormConfig& cfg);

}  // namespace monose3
