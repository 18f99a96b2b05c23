#include "monose3/mononorm.hpp"

#include <string>

#include "monose3/errors.hpp"

namespace monose3 {

Vec9 NormalizedPose::to_vector() const {
  Vec9 v;
  v << rot6, tx_n, ty_n, tz_n;
  return v;
}

NormalizedPose NormalizedPose::from_vector(const Vec9& v) {
  return {v.head<6>(), v(6), v(7), v(8)};
}

void NormConfig::validate() const {
  if (!(0.0 < z_min && z_min < c_z && c_z < z_max)) {
    throw Error(ErrorCode::InvalidConfig,
                "depth config requires 0 < z_min < c_z < z_max");
  }
}

NormalizedPose normalize(const Pose& pose, const CameraIntrinsics& K,
                         const NormConfig& cfg) {
  const double tz = pose.t.z();
  if (!(tz > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth,
                "cannot normalize pose with depth " + std::to_string(tz));
  }
  NormalizedPose n;
  n.rot6 = Rotation6D::from_matrix(pose.R).to_vector();
  n.tx_n = K.f * pose.t.x() / (K.w * tz);
  n.ty_n = K.f * pose.t.y() / (K.h * tz);
  n.tz_n = tz - cfg.c_z;
  return n;
}

Pose denormalize(const NormalizedPose& n, const CameraIntrinsics& K,
                 const NormConfig& cfg) {
  const double tz = n.tz_n + cfg.c_z;
  if (!(tz > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth,
                "normalized depth offset " + std::to_string(n.tz_n) +
                    " maps to non-positive depth");
  }
  Pose pose;
  pose.R = gram_schmidt_6d(Rotation6D::from_vector(n.rot6));
  pose.t = {K.w * tz / K.f * n.tx_n, K.h * tz / K.f * n.ty_n, tz};
  return pose;
}

}  // namespace monose3
