#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace monose3 {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Rigid transform taking robot-frame points into the camera frame.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  Eigen::Matrix4d homogeneous() const;
};

/// First two columns of a rotation matrix. Any reals are accepted; the
/// conversion back to SO(3) goes through gram_schmidt_6d.
struct Rotation6D {
  Vec3 r1 = Vec3::UnitX();
  Vec3 r2 = Vec3::UnitY();

  static Rotation6D from_matrix(const Mat3& R);
  static Rotation6D from_vector(const Vec6& v);
  Vec6 to_vector() const;
};

struct CameraIntrinsics {
  double f = 600.0;
  double w = 640.0;
  double h = 480.0;
  double cx = 320.0;
  double cy = 240.0;

  /// Principal point defaults to the image center.
  static CameraIntrinsics centered(double f, double w, double h);
  void validate() const;
};

struct DepthRange {
  double z_min = 0.3;
  double z_max = 3.0;
};

struct CropRect {
  double u0 = 0.0;
  double v0 = 0.0;
  double width = 0.0;
  double height = 0.0;
  double target_w = 320.0;
  double target_h = 240.0;

  bool contains(const Vec2& uv, double tol = 1e-9) const;
};

inline constexpr double kGramSchmidtEps = 1e-8;
inline constexpr double kDefaultCropExpand = 1.4;
inline constexpr double kMinCropSize = 32.0;

/// Maps a 6D rotation to SO(3). Throws DegenerateRotation6D when r1 or the
/// part of r2 orthogonal to r1 is shorter than kGramSchmidtEps.
Mat3 gram_schmidt_6d(const Rotation6D& r);

/// Pinhole projection. Throws BehindCamera when p.z <= 0.
Vec2 project_point(const Vec3& p, const CameraIntrinsics& K);

/// True iff the pose origin projects inside the image shrunk by `margin`
/// (a fraction of w and h) and its depth lies in `depth`.
bool in_frustum(const Pose& pose, const CameraIntrinsics& K, double margin,
                const DepthRange& depth = {});

/// Projected bounding box of `points`, inflated by `expand`, raised to at
/// least kMinCropSize, then widened to the target aspect ratio about its
/// center.
CropRect crop_region(std::span<const Vec3> points, const CameraIntrinsics& K,
                     std::pair<double, double> target = {320.0, 240.0},
                     double expand = kDefaultCropExpand);

bool is_rotation(const Mat3& R, double tol = 1e-9);

}  // namespace monose3
