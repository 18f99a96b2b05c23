#include "monose3/denoising.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "monose3/errors.hpp"

namespace monose3 {

Observation make_observation(const Pose& gt, const CameraIntrinsics& K, const ChainSpec& chain,
                             const JointConfig& joints, double pixel_noise, Rng& rng) {
  Observation obs{gt, {}, K, joints};
  for (const Vec3& kp : forward_kinematics(chain, joints)) {
    const Vec3 cam = gt.apply(kp);
    if (cam.z() <= 0.0) {
      obs.keypoints_2d.emplace_back(std::nullopt);
      continue;
    }
    Vec2 uv = project_point(cam, K);
    if (pixel_noise > 0.0) {
      uv += pixel_noise * Vec2(standard_normal(rng), standard_normal(rng));
    }
    obs.keypoints_2d.emplace_back(uv);
  }
  return obs;
}

TimestepEmbedding embed_timestep(double t, int c_emb) {
  if (c_emb <= 0 || c_emb % 2 != 0) {
    throw Error(ErrorCode::OddEmbeddingSize,
                "embedding size must be a positive even number, got " + std::to_string(c_emb));
  }
  if (t < 0.0) throw Error(ErrorCode::InvalidRange, "timestep must be >= 0");
  TimestepEmbedding emb;
  emb.values.resize(static_cast<std::size_t>(c_emb));
  for (int i = 0; i < c_emb / 2; ++i) {
    const double freq = std::pow(10000.0, 2.0 * i / c_emb);
    emb.values[static_cast<std::size_t>(2 * i)] = std::sin(t / freq);
    emb.values[static_cast<std::size_t>(2 * i + 1)] = std::cos(t / freq);
  }
  return emb;
}

Pose apply_update(const Pose& pose_t, const DenoiserOutput& out, const CameraIntrinsics& K) {
  const double tz = pose_t.t.z();
  if (!(tz > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "update needs a pose with positive depth");
  }
  if (!(out.v_z > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "depth ratio v_z must be > 0");
  }
  Pose next;
  next.t.z() = out.v_z * tz;
  next.t.head<2>() = (out.v_xy / K.f + pose_t.t.head<2>() / tz) * next.t.z();
  next.R = gram_schmidt_6d(Rotation6D::from_vector(out.dr6)) * pose_t.R;
  return next;
}

DenoiserOutput compute_gt_targets(const Pose& pose_t, const Pose& pose0,
                                  const CameraIntrinsics& K) {
  if (!(pose_t.t.z() > 0.0) || !(pose0.t.z() > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "target computation needs positive depths");
  }
  DenoiserOutput out;
  out.dr6 = Rotation6D::from_matrix(pose0.R * pose_t.R.transpose()).to_vector();
  out.v_z = pose0.t.z() / pose_t.t.z();
  out.v_xy = K.f * (pose0.t.head<2>() / pose0.t.z() - pose_t.t.head<2>() / pose_t.t.z());
  return out;
}

DenoiserSpec DenoiserSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  double value = 0.0;
  if (colon != std::string::npos) {
    const std::string arg = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value);
    if (ec != std::errc() || ptr != arg.data() + arg.size()) {
      throw Error(ErrorCode::InvalidConfig, "bad denoiser parameter '" + arg + "'");
    }
  }
  if (name == "perfect" && colon == std::string::npos) return perfect();
  if (name == "noisy" && colon != std::string::npos) {
    if (!(value >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noisy sigma0 must be >= 0");
    return noisy(value);
  }
  if (name == "biased" && colon != std::string::npos) return biased(value);
  throw Error(ErrorCode::InvalidConfig,
              "denoiser must be perfect, noisy:<sigma0> or biased:<pixels>, got '" + text + "'");
}

std::string DenoiserSpec::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Perfect: os << "perfect"; break;
    case Kind::Noisy: os << "noisy:" << sigma0; break;
    case Kind::Biased: os << "biased:" << bias; break;
  }
  return os.str();
}

DenoiserOutput predict(const Pose& pose_t, int t, const Observation& obs,
                       const DenoiserSpec& spec, const Schedule& sched, Rng& rng) {
  DenoiserOutput out = compute_gt_targets(pose_t, obs.gt_pose, obs.intrinsics);
  switch (spec.kind) {
    case DenoiserSpec::Kind::Perfect:
      break;
    case DenoiserSpec::Kind::Noisy: {
      const double sd = spec.sigma0 * std::sqrt(1.0 - sched.alpha_bar_at(t));
      for (int i = 0; i < 2; ++i) out.v_xy(i) += sd * standard_normal(rng);
      for (int i = 0; i < 6; ++i) out.dr6(i) += sd * standard_normal(rng);
      out.v_z *= std::exp(sd * standard_normal(rng));
      break;
    }
    case DenoiserSpec::Kind::Biased:
      out.v_xy += Vec2::Constant(spec.bias);
      break;
  }
  return out;
}

Pose denoise(const Pose& pose_t, int t, const Observation& obs, const DenoiserSpec& spec,
             const Schedule& sched, Rng& rng) {
  return apply_update(pose_t, predict(pose_t, t, obs, spec, sched, rng), obs.intrinsics);
}

double point_distance(const Pose& a, const Pose& b, std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyPointSet, "point set is empty");
  double sum = 0.0;
  for (const Vec3& x : points) sum += (a.apply(x) - b.apply(x)).norm();
  return sum / static_cast<double>(points.size());
}

LossTerms decomposed_loss(const Pose& pose0, const Pose& pose_t, const DenoiserOutput& out,
                          std::span<const Vec3> points, const CameraIntrinsics& K) {
  const DenoiserOutput gt = compute_gt_targets(pose_t, pose0, K);

  DenoiserOutput only_xy = gt;
  only_xy.v_xy = out.v_xy;
  DenoiserOutput only_rot = gt;
  only_rot.dr6 = out.dr6;
  DenoiserOutput only_z = gt;
  only_z.v_z = out.v_z;

  LossTerms loss;
  loss.xy = point_distance(pose0, apply_update(pose_t, only_xy, K), points);
  loss.rot = point_distance(pose0, apply_update(pose_t, only_rot, K), points);
  loss.z = point_distance(pose0, apply_update(pose_t, only_z, K), points);
  loss.total = loss.xy + loss.rot + loss.z;
  return loss;
}

}  // namespace monose3
