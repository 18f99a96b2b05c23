#pragma once

// Helpers shared by the unit tests. Random rotations here come from unit
// quaternions so they do not share code with the library's own sampler.

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "monose3/mononorm.hpp"

namespace testsupport {

using monose3::CameraIntrinsics;
using monose3::Mat3;
using monose3::Pose;
using monose3::Vec3;

inline Mat3 quat_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// A pose whose origin projects inside the image and lies in [z_lo, z_hi].
inline Pose visible_pose(std::mt19937_64& rng, const CameraIntrinsics& K, double z_lo = 0.3,
                         double z_hi = 3.0) {
  Pose p;
  p.R = quat_rotation(rng);
  const double z = uniform(rng, z_lo, z_hi);
  const double u = uniform(rng, 0.05 * K.w, 0.95 * K.w);
  const double v = uniform(rng, 0.05 * K.h, 0.95 * K.h);
  p.t = Vec3((u - K.cx) * z / K.f, (v - K.cy) * z / K.f, z);
  return p;
}

inline CameraIntrinsics random_intrinsics(std::mt19937_64& rng) {
  const bool wide = uniform(rng, 0.0, 1.0) < 0.5;
  return CameraIntrinsics::centered(uniform(rng, 400.0, 900.0), wide ? 1280.0 : 640.0,
                                    wide ? 720.0 : 480.0);
}

inline double rot_err(const Mat3& a, const Mat3& b) { return (a - b).norm(); }

inline double pose_err(const Pose& a, const Pose& b) {
  return std::max((a.R - b.R).norm(), (a.t - b.t).norm());
}

}  // namespace testsupport
