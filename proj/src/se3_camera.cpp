#include "monose3/se3_camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "monose3/errors.hpp"

namespace monose3 {

namespace {

// Boundary slack for frustum tests. Clamped poses land exactly on the box
// edge and the normalize/project round trip can overshoot by a few ulps.
constexpr double kBoundaryTol = 1e-9;

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateRotation6D: return "DegenerateRotation6D";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::EmptyPointSet: return "EmptyPointSet";
    case ErrorCode::InvalidScheduleParams: return "InvalidScheduleParams";
    case ErrorCode::InvalidTimestepOrder: return "InvalidTimestepOrder";
    case ErrorCode::OddEmbeddingSize: return "OddEmbeddingSize";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidIterationCount: return "InvalidIterationCount";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Eigen::Matrix4d Pose::homogeneous() const {
  Eigen::Matrix4d H = Eigen::Matrix4d::Identity();
  H.topLeftCorner<3, 3>() = R;
  H.topRightCorner<3, 1>() = t;
  return H;
}

Rotation6D Rotation6D::from_matrix(const Mat3& R) {
  return {R.col(0), R.col(1)};
}

Rotation6D Rotation6D::from_vector(const Vec6& v) {
  return {v.head<3>(), v.tail<3>()};
}

Vec6 Rotation6D::to_vector() const {
  Vec6 v;
  v << r1, r2;
  return v;
}

CameraIntrinsics CameraIntrinsics::centered(double f, double w, double h) {
  return {f, w, h, w / 2.0, h / 2.0};
}

void CameraIntrinsics::validate() const {
  if (!(f > 0.0) || !(w > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::InvalidRange,
                "camera intrinsics require f, w, h > 0");
  }
}

bool CropRect::contains(const Vec2& uv, double tol) const {
  return uv.x() >= u0 - tol && uv.x() <= u0 + width + tol &&
         uv.y() >= v0 - tol && uv.y() <= v0 + height + tol;
}

Mat3 gram_schmidt_6d(const Rotation6D& r) {
  const double n1 = r.r1.norm();
  if (!(n1 >= kGramSchmidtEps)) {
    throw Error(ErrorCode::DegenerateRotation6D,
                "first 6D column has norm " + std::to_string(n1));
  }
  const Vec3 u1 = r.r1 / n1;
  const Vec3 ortho = r.r2 - r.r2.dot(u1) * u1;
  const double n2 = ortho.norm();
  if (!(n2 >= kGramSchmidtEps)) {
    throw Error(ErrorCode::DegenerateRotation6D,
                "second 6D column is parallel to the first (residual " +
                    std::to_string(n2) + ")");
  }
  const Vec3 u2 = ortho / n2;
  Mat3 R;
  R.col(0) = u1;
  R.col(1) = u2;
  R.col(2) = u1.cross(u2);
  return R;
}

Vec2 project_point(const Vec3& p, const CameraIntrinsics& K) {
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::BehindCamera,
                "point depth " + std::to_string(p.z()) + " is not positive");
  }
  return {K.f * p.x() / p.z() + K.cx, K.f * p.y() / p.z() + K.cy};
}

bool in_frustum(const Pose& pose, const CameraIntrinsics& K, double margin,
                const DepthRange& depth) {
  const double z = pose.t.z();
  if (!(z > 0.0)) return false;
  if (z < depth.z_min - kBoundaryTol || z > depth.z_max + kBoundaryTol) {
    return false;
  }
  const Vec2 uv = project_point(pose.t, K);
  const double tol = kBoundaryTol * std::max(K.w, K.h);
  return uv.x() >= margin * K.w - tol && uv.x() <= (1.0 - margin) * K.w + tol &&
         uv.y() >= margin * K.h - tol && uv.y() <= (1.0 - margin) * K.h + tol;
}

CropRect crop_region(std::span<const Vec3> points, const CameraIntrinsics& K,
                     std::pair<double, double> target, double expand) {
  if (points.empty()) {
    throw Error(ErrorCode::EmptyPointSet, "crop_region needs at least one point");
  }
  if (!(target.first > 0.0) || !(target.second > 0.0) || !(expand >= 1.0)) {
    throw Error(ErrorCode::InvalidRange,
                "crop target must be positive and expand at least 1");
  }
  double umin = std::numeric_limits<double>::infinity();
  double vmin = umin;
  double umax = -umin;
  double vmax = -umin;
  for (const Vec3& p : points) {
    const Vec2 uv = project_point(p, K);
    umin = std::min(umin, uv.x());
    umax = std::max(umax, uv.x());
    vmin = std::min(vmin, uv.y());
    vmax = std::max(vmax, uv.y());
  }
  const double cu = 0.5 * (umin + umax);
  const double cv = 0.5 * (vmin + vmax);
  double width = std::max((umax - umin) * expand, kMinCropSize);
  double height = std::max((vmax - vmin) * expand, kMinCropSize);

  const double aspect = target.first / target.second;
  if (width / height < aspect) {
    width = height * aspect;
  } else {
    height = width / aspect;
  }
  return {cu - 0.5 * width, cv - 0.5 * height, width, height, target.first,
          target.second};
}

bool is_rotation(const Mat3& R, double tol) {
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho < tol && std::abs(R.determinant() - 1.0) < tol;
}

}  // namespace monose3
