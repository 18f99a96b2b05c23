#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "monose3/denoising.hpp"
#include "monose3/diffusion.hpp"
#include "monose3/errors.hpp"
#include "support.hpp"

using namespace monose3;
using testsupport::uniform;

namespace {

Vec6 identity6() {
  Vec6 v;
  v << 1, 0, 0, 0, 1, 0;
  return v;
}

Observation observe(const Pose& gt, const CameraIntrinsics& K) {
  Rng rng(0);
  const ChainSpec chain = ChainSpec::franka_like();
  return make_observation(gt, K, chain, JointConfig{std::vector<double>(7, 0.3)}, 0.0, rng);
}

}  // namespace

TEST_CASE("embedding examples") {
  const auto zero = embed_timestep(0, 8).values;
  REQUIRE(zero.size() == 8);
  for (std::size_t i = 0; i < 8; i += 2) {
    CHECK(zero[i] == 0.0);
    CHECK(zero[i + 1] == 1.0);
  }
  const auto one = embed_timestep(1, 2).values;
  CHECK(one[0] == doctest::Approx(std::sin(1.0)));
  CHECK(one[1] == doctest::Approx(std::cos(1.0)));

  const auto e = embed_timestep(37, 4).values;
  REQUIRE(e.size() == 4);
  CHECK(e[2] == doctest::Approx(std::sin(37.0 / std::pow(10000.0, 0.5))));
  CHECK(e[3] == doctest::Approx(std::cos(37.0 / std::pow(10000.0, 0.5))));

  try {
    embed_timestep(3, 3);
    FAIL("expected OddEmbeddingSize");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::OddEmbeddingSize);
  }
}

TEST_CASE("embeddings of distinct timesteps are distinct and bounded") {
  std::vector<std::vector<double>> all;
  for (int t = 1; t <= 100; ++t) {
    all.push_back(embed_timestep(t).values);
    for (double v : all.back()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) CHECK(all[a] != all[b]);
  }
}

TEST_CASE("identity update") {
  std::mt19937_64 rng(51);
  const CameraIntrinsics K;
  const Pose p = testsupport::visible_pose(rng, K);
  DenoiserOutput out;
  out.dr6 = identity6();
  const Pose q = apply_update(p, out, K);
  CHECK(testsupport::pose_err(p, q) < 1e-15);
}

TEST_CASE("update depth is multiplicative") {
  Pose p;
  p.t = {0.1, 0.2, 1.0};
  DenoiserOutput out;
  out.v_z = 2.0;
  const Pose q = apply_update(p, out, CameraIntrinsics{});
  CHECK(q.t.z() == 2.0);
  // projection direction is unchanged when v_xy = 0
  CHECK(q.t.x() / q.t.z() == doctest::Approx(0.1));
  out.v_z = 0.0;
  CHECK_THROWS_AS(apply_update(p, out, CameraIntrinsics{}), Error);
}

TEST_CASE("update follows the written formula") {
  std::mt19937_64 rng(52);
  for (int i = 0; i < 200; ++i) {
    const CameraIntrinsics K = testsupport::random_intrinsics(rng);
    const Pose p = testsupport::visible_pose(rng, K);
    DenoiserOutput out;
    out.v_xy = {uniform(rng, -50, 50), uniform(rng, -50, 50)};
    out.v_z = uniform(rng, 0.5, 2.0);
    const Mat3 dR = testsupport::quat_rotation(rng);
    out.dr6 = Rotation6D::from_matrix(dR).to_vector();
    const Pose q = apply_update(p, out, K);
    const double tz = out.v_z * p.t.z();
    CHECK(q.t.z() == doctest::Approx(tz).epsilon(1e-14));
    CHECK(q.t.x() == doctest::Approx((out.v_xy.x() / K.f + p.t.x() / p.t.z()) * tz).epsilon(1e-12));
    CHECK(q.t.y() == doctest::Approx((out.v_xy.y() / K.f + p.t.y() / p.t.z()) * tz).epsilon(1e-12));
    CHECK((q.R - dR * p.R).norm() < 1e-12);
  }
}

TEST_CASE("targets at the fixed point and depth ratio") {
  std::mt19937_64 rng(53);
  const CameraIntrinsics K;
  const Pose p = testsupport::visible_pose(rng, K);
  const DenoiserOutput out = compute_gt_targets(p, p, K);
  CHECK(out.v_xy.norm() < 1e-12);
  CHECK((out.dr6 - identity6()).norm() < 1e-12);
  CHECK(out.v_z == 1.0);

  Pose p0, pt;
  p0.t = {0, 0, 1.5};
  pt.t = {0, 0, 3.0};
  CHECK(compute_gt_targets(pt, p0, K).v_z == 0.5);
  pt.t.z() = -1;
  CHECK_THROWS_AS(compute_gt_targets(pt, p0, K), Error);
}

TEST_CASE("targets then update recover the ground truth") {
  std::mt19937_64 rng(54);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const CameraIntrinsics K = testsupport::random_intrinsics(rng);
    const Pose p0 = testsupport::visible_pose(rng, K);
    const Pose pt = testsupport::visible_pose(rng, K);
    worst = std::max(worst, testsupport::pose_err(apply_update(pt, compute_gt_targets(pt, p0, K), K), p0));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("oracle denoisers") {
  const Schedule sched = make_linear_schedule(100, 1e-4, 0.02);
  std::mt19937_64 prng(55);
  const CameraIntrinsics K;
  for (int i = 0; i < 100; ++i) {
    const Pose gt = testsupport::visible_pose(prng, K);
    const Pose pt = testsupport::visible_pose(prng, K);
    const Observation obs = observe(gt, K);
    Rng r1(i), r2(i), r3(i);
    const int t = 1 + i % 100;
    CHECK(testsupport::pose_err(denoise(pt, t, obs, DenoiserSpec::perfect(), sched, r1), gt) < 1e-9);
    const Pose zero_noise = denoise(pt, t, obs, DenoiserSpec::noisy(0.0), sched, r2);
    CHECK(testsupport::pose_err(zero_noise, gt) < 1e-9);
    // noisy:0 also consumes the same draws, so it is exactly the perfect output
    CHECK(testsupport::pose_err(zero_noise, denoise(pt, t, obs, DenoiserSpec::perfect(), sched, r3)) == 0.0);

    const DenoiserOutput exact = compute_gt_targets(pt, gt, K);
    const DenoiserOutput biased = predict(pt, t, obs, DenoiserSpec::biased(5.0), sched, r1);
    CHECK((biased.v_xy - exact.v_xy - Vec2(5, 5)).norm() < 1e-12);
    CHECK(biased.dr6 == exact.dr6);
    CHECK(biased.v_z == exact.v_z);
  }
}

TEST_CASE("noisy oracle is reproducible") {
  const Schedule sched = make_linear_schedule(100, 1e-4, 0.02);
  std::mt19937_64 prng(56);
  const CameraIntrinsics K;
  const Pose gt = testsupport::visible_pose(prng, K);
  const Pose pt = testsupport::visible_pose(prng, K);
  const Observation obs = observe(gt, K);
  Rng a(9), b(9);
  for (int t = 1; t <= 100; ++t) {
    const Pose pa = denoise(pt, t, obs, DenoiserSpec::noisy(0.1), sched, a);
    const Pose pb = denoise(pt, t, obs, DenoiserSpec::noisy(0.1), sched, b);
    CHECK(pa.R == pb.R);
    CHECK(pa.t == pb.t);
  }
}

TEST_CASE("noisy oracle error grows with t") {
  const Schedule sched = make_linear_schedule(100, 1e-4, 0.02);
  std::mt19937_64 prng(57);
  const CameraIntrinsics K;
  const Pose gt = testsupport::visible_pose(prng, K);
  const Pose pt = testsupport::visible_pose(prng, K);
  const Observation obs = observe(gt, K);
  const DenoiserOutput exact = compute_gt_targets(pt, gt, K);
  double prev = -1.0;
  for (int t : {1, 5, 10, 20, 40, 60, 80, 100}) {
    Rng rng(static_cast<std::uint64_t>(t));
    double sum = 0.0;
    const int N = 10000;
    for (int i = 0; i < N; ++i) {
      const DenoiserOutput o = predict(pt, t, obs, DenoiserSpec::noisy(0.15), sched, rng);
      sum += (o.dr6 - exact.dr6).norm() + (o.v_xy - exact.v_xy).norm() + std::abs(std::log(o.v_z / exact.v_z));
    }
    const double mean = sum / N;
    CHECK(mean > prev);
    prev = mean;
    // the v_z draw is exp(sd * n) so v_z stays positive
  }
}

TEST_CASE("denoiser spec parsing") {
  CHECK(DenoiserSpec::parse("perfect").kind == DenoiserSpec::Kind::Perfect);
  const DenoiserSpec n = DenoiserSpec::parse("noisy:0.15");
  CHECK(n.kind == DenoiserSpec::Kind::Noisy);
  CHECK(n.sigma0 == 0.15);
  const DenoiserSpec b = DenoiserSpec::parse("biased:5.0");
  CHECK(b.kind == DenoiserSpec::Kind::Biased);
  CHECK(b.bias == 5.0);
  CHECK(DenoiserSpec::parse(n.to_string()).sigma0 == 0.15);
  CHECK_THROWS_AS(DenoiserSpec::parse("noisy"), Error);
  CHECK_THROWS_AS(DenoiserSpec::parse("noisy:-1"), Error);
  CHECK_THROWS_AS(DenoiserSpec::parse("noisy:abc"), Error);
  CHECK_THROWS_AS(DenoiserSpec::parse("cnn"), Error);
}

TEST_CASE("point distance is a pseudometric") {
  std::mt19937_64 rng(58);
  const CameraIntrinsics K;
  std::vector<Vec3> pts;
  for (int i = 0; i < 30; ++i) pts.emplace_back(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, 0, 1));
  for (int i = 0; i < 300; ++i) {
    const Pose a = testsupport::visible_pose(rng, K);
    const Pose b = testsupport::visible_pose(rng, K);
    const Pose c = testsupport::visible_pose(rng, K);
    CHECK(point_distance(a, a, pts) == 0.0);
    CHECK(point_distance(a, b, pts) >= 0.0);
    CHECK(std::abs(point_distance(a, b, pts) - point_distance(b, a, pts)) < 1e-12);
    CHECK(point_distance(a, c, pts) <= point_distance(a, b, pts) + point_distance(b, c, pts) + 1e-9);
    Pose shifted = a;
    const Vec3 d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    shifted.t += d;
    CHECK(point_distance(a, shifted, pts) == doctest::Approx(d.norm()).epsilon(1e-12));
  }
  CHECK_THROWS_AS(point_distance(Pose{}, Pose{}, std::vector<Vec3>{}), Error);
}

TEST_CASE("decomposed loss term isolation") {
  std::mt19937_64 rng(59);
  const ChainSpec chain = ChainSpec::franka_like();
  for (int i = 0; i < 500; ++i) {
    const CameraIntrinsics K = testsupport::random_intrinsics(rng);
    const Pose p0 = testsupport::visible_pose(rng, K);
    const Pose pt = testsupport::visible_pose(rng, K);
    JointConfig j;
    for (int k = 0; k < 7; ++k) j.angles.push_back(uniform(rng, -M_PI, M_PI));
    const auto pts = loss_points(chain, j);
    const DenoiserOutput gt = compute_gt_targets(pt, p0, K);

    const LossTerms exact = decomposed_loss(p0, pt, gt, pts, K);
    CHECK(exact.xy < 1e-9);
    CHECK(exact.rot < 1e-9);
    CHECK(exact.z < 1e-9);

    DenoiserOutput o = gt;
    o.v_xy += Vec2(uniform(rng, 1, 20), uniform(rng, -20, -1));
    LossTerms l = decomposed_loss(p0, pt, o, pts, K);
    CHECK(l.xy > 1e-6);
    CHECK(l.rot < 1e-9);
    CHECK(l.z < 1e-9);

    o = gt;
    o.dr6 += 0.2 * Vec6::Constant(uniform(rng, 0.5, 1.0)).cwiseProduct((Vec6() << 1, -1, 1, 1, 1, -1).finished());
    l = decomposed_loss(p0, pt, o, pts, K);
    CHECK(l.rot > 1e-6);
    CHECK(l.xy < 1e-9);
    CHECK(l.z < 1e-9);

    o = gt;
    o.v_z *= uniform(rng, 1.05, 1.5);
    l = decomposed_loss(p0, pt, o, pts, K);
    CHECK(l.z > 1e-6);
    CHECK(l.xy < 1e-9);
    CHECK(l.rot < 1e-9);
    CHECK(l.total == doctest::Approx(l.xy + l.rot + l.z));
  }
}

TEST_CASE("observation projects keypoints") {
  std::mt19937_64 rng(60);
  const CameraIntrinsics K;
  const Pose gt = testsupport::visible_pose(rng, K, 1.5, 2.5);
  const ChainSpec chain = ChainSpec::franka_like();
  const JointConfig j{std::vector<double>(7, 0.2)};
  Rng r(1);
  const Observation obs = make_observation(gt, K, chain, j, 0.0, r);
  const auto kp = forward_kinematics(chain, j);
  REQUIRE(obs.keypoints_2d.size() == kp.size());
  for (std::size_t i = 0; i < kp.size(); ++i) {
    const Vec3 c = gt.apply(kp[i]);
    if (c.z() > 0) {
      REQUIRE(obs.keypoints_2d[i].has_value());
      CHECK((*obs.keypoints_2d[i] - project_point(c, K)).norm() < 1e-9);
    } else {
      CHECK_FALSE(obs.keypoints_2d[i].has_value());
    }
  }
}
