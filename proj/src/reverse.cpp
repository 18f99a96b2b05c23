#include "monose3/reverse.hpp"

#include <cmath>
#include <ostream>

#include "monose3/errors.hpp"
#include "monose3/metrics.hpp"

namespace monose3 {

void ReverseConfig::validate(const Schedule& sched) const {
  if (ddim_steps < 1) throw Error(ErrorCode::InvalidConfig, "ddim_steps must be >= 1");
  if (refine_steps < 0) throw Error(ErrorCode::InvalidConfig, "refine_steps must be >= 0");
  if (refine_timestep < 0 || refine_timestep > sched.T) {
    throw Error(ErrorCode::InvalidConfig, "refine timestep outside 0..T");
  }
  if (!(sched.eta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "eta must be >= 0");
  if (init_mode == InitMode::PreviousEstimate && !previous) {
    throw Error(ErrorCode::InvalidConfig, "previous-estimate init needs a previous pose");
  }
  ddim_timesteps(sched.T, ddim_steps, start_timestep);
}

Vec9 predicted_noise(const NormalizedPose& n_t, const NormalizedPose& n0_hat, int t,
                     const Schedule& sched) {
  const double ab = sched.alpha_bar_at(t);
  return (n_t.to_vector() - std::sqrt(ab) * n0_hat.to_vector()) / std::sqrt(1.0 - ab);
}

DdimCoefficients ddim_coefficients(const Schedule& sched, int t, int t_prev) {
  if (!(t > t_prev) || t_prev < 0 || t > sched.T) {
    throw Error(ErrorCode::InvalidTimestepOrder,
                "DDIM step needs T >= t > t_prev >= 0 (t=" + std::to_string(t) +
                    ", t_prev=" + std::to_string(t_prev) + ")");
  }
  const double ab_prev = sched.alpha_bar_at(t_prev);
  const double radicand = 1.0 - ab_prev - sched.sigma_sq(t, t_prev);
  DdimCoefficients c;
  c.signal = std::sqrt(ab_prev);
  c.clamped = radicand < 0.0;
  c.noise = c.clamped ? 0.0 : std::sqrt(radicand);
  return c;
}

NormalizedPose ddim_step(const NormalizedPose& n_t, const NormalizedPose& n0_hat, int t,
                         int t_prev, const Schedule& sched, bool* clamped) {
  const DdimCoefficients c = ddim_coefficients(sched, t, t_prev);
  if (clamped) *clamped = c.clamped;
  Vec9 out = c.signal * n0_hat.to_vector();
  if (c.noise > 0.0) out += c.noise * predicted_noise(n_t, n0_hat, t, sched);
  return NormalizedPose::from_vector(out);
}

Pose initial_pose(const ReverseConfig& rcfg, const NoiseScales& scales, const FrustumBox& box,
                  const CameraIntrinsics& K, const NormConfig& cfg, Rng& rng) {
  switch (rcfg.init_mode) {
    case InitMode::Canonical:
      return Pose{rcfg.canonical_rotation, Vec3(0.0, 0.0, cfg.c_z)};
    case InitMode::PreviousEstimate:
      if (!rcfg.previous) {
        throw Error(ErrorCode::InvalidConfig, "previous-estimate init needs a previous pose");
      }
      return *rcfg.previous;
    case InitMode::PriorSample:
      break;
  }
  // Pure noise prior: alpha_bar(T) is treated as 0, translation bounded.
  const Vec9 s = scales.as_vector();
  for (int attempt = 0; attempt < 16; ++attempt) {
    Vec9 v;
    for (int i = 0; i < 9; ++i) v(i) = s(i) * standard_normal(rng);
    NormalizedPose n = NormalizedPose::from_vector(v);
    box.clamp(n);
    try {
      return denormalize(n, K, cfg);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateRotation6D) throw;
    }
  }
  throw Error(ErrorCode::DegenerateRotation6D, "prior sample stayed degenerate");
}

namespace {

struct StepContext {
  const Observation& obs;
  const Schedule& sched;
  const DenoiserSpec& denoiser;
  std::vector<Vec3> keypoints;
  Rng& rng;

  void finish(TrajectoryStep& step) const {
    step.add = add_metric(obs.gt_pose, step.pose_out, keypoints);
    std::vector<Vec3> cam;
    cam.reserve(keypoints.size());
    for (const Vec3& k : keypoints) cam.push_back(step.pose_in.apply(k));
    try {
      step.crop = crop_region(cam, obs.intrinsics);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BehindCamera) throw;
    }
  }

  TrajectoryStep refine(const Pose& pose, int t) const {
    TrajectoryStep step;
    step.phase = Phase::Refine;
    step.t = step.t_prev = t;
    step.pose_in = pose;
    step.predicted = denoise(pose, t, obs, denoiser, sched, rng);
    step.pose_out = step.predicted;
    finish(step);
    return step;
  }
};

}  // namespace

ReverseResult run_reverse(const Observation& obs, const ChainSpec& chain, const NormConfig& cfg,
                          const Schedule& sched, const NoiseScales& scales,
                          const FrustumBox& box, const ReverseConfig& rcfg,
                          const DenoiserSpec& denoiser, Rng& rng) {
  rcfg.validate(sched);
  const CameraIntrinsics& K = obs.intrinsics;
  StepContext ctx{obs, sched, denoiser, forward_kinematics(chain, obs.joints), rng};

  ReverseResult res;
  Pose pose = initial_pose(rcfg, scales, box, K, cfg, rng);
  const std::vector<int> ts = ddim_timesteps(sched.T, rcfg.ddim_steps, rcfg.start_timestep);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    TrajectoryStep step;
    step.phase = Phase::Ddim;
    step.t = ts[i];
    step.t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    step.pose_in = pose;

    const NormalizedPose n_t = normalize(pose, K, cfg);
    step.predicted = denoise(pose, step.t, obs, denoiser, sched, rng);
    const NormalizedPose n0 = normalize(step.predicted, K, cfg);
    const NormalizedPose n_prev = ddim_step(n_t, n0, step.t, step.t_prev, sched, &step.coef_clamped);
    step.pose_out = denormalize(n_prev, K, cfg);
    if (step.coef_clamped) ++res.clamp_events;

    ctx.finish(step);
    pose = step.pose_out;
    res.trajectory.steps.push_back(std::move(step));
  }
  for (int k = 0; k < rcfg.refine_steps; ++k) {
    res.trajectory.steps.push_back(ctx.refine(pose, rcfg.refine_timestep));
    pose = res.trajectory.steps.back().pose_out;
  }
  res.pose = pose;
  return res;
}

ReverseResult run_direct_regression(const Observation& obs, const ChainSpec& chain,
                                    const NormConfig& cfg, const Schedule& sched,
                                    const NoiseScales& scales, const FrustumBox& box,
                                    const ReverseConfig& rcfg, int iterations,
                                    const DenoiserSpec& denoiser, Rng& rng) {
  if (iterations < 1) {
    throw Error(ErrorCode::InvalidIterationCount, "direct regression needs >= 1 iteration");
  }
  StepContext ctx{obs, sched, denoiser, forward_kinematics(chain, obs.joints), rng};
  ReverseResult res;
  Pose pose = initial_pose(rcfg, scales, box, obs.intrinsics, cfg, rng);
  for (int k = 0; k < iterations; ++k) {
    res.trajectory.steps.push_back(ctx.refine(pose, rcfg.refine_timestep));
    pose = res.trajectory.steps.back().pose_out;
  }
  res.pose = pose;
  return res;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool header) {
  if (header) {
    os << "t,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,add\n";
  }
  const auto old_prec = os.precision(17);
  for (const TrajectoryStep& s : traj.steps) {
    os << s.t;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) os << ',' << s.pose_out.R(r, c);
    }
    for (int i = 0; i < 3; ++i) os << ',' << s.pose_out.t(i);
    os << ',';
    if (s.add) os << *s.add;
    os << '\n';
  }
  os.precision(old_prec);
}

}  // namespace monose3
