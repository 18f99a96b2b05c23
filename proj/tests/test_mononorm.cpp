#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "monose3/errors.hpp"
#include "monose3/mononorm.hpp"
#include "support.hpp"

using namespace monose3;
using testsupport::uniform;

TEST_CASE("normalize centered pose") {
  const CameraIntrinsics K = CameraIntrinsics::centered(600, 640, 480);
  Pose p;
  p.t = {0, 0, 1.5};
  const NormalizedPose n = normalize(p, K, {});
  Vec6 expected;
  expected << 1, 0, 0, 0, 1, 0;
  CHECK(n.rot6 == expected);
  CHECK(n.tx_n == 0.0);
  CHECK(n.ty_n == 0.0);
  CHECK(n.tz_n == 0.0);
}

TEST_CASE("normalize hand arithmetic") {
  const CameraIntrinsics K = CameraIntrinsics::centered(600, 640, 480);
  Pose p;
  p.t = {0.64, 0.3, 1.2};
  const NormalizedPose n = normalize(p, K, {});
  CHECK(n.tx_n == doctest::Approx(600 * 0.64 / (640 * 1.2)).epsilon(1e-15));
  CHECK(n.tx_n == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n.ty_n == doctest::Approx(600 * 0.3 / (480 * 1.2)).epsilon(1e-15));
  CHECK(n.tz_n == doctest::Approx(1.2 - 1.5).epsilon(1e-15));
}

TEST_CASE("normalize rejects non-positive depth") {
  Pose p;
  p.t = {0, 0, 0};
  try {
    normalize(p, CameraIntrinsics{}, {});
    FAIL("expected NonPositiveDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveDepth);
  }
}

TEST_CASE("denormalize examples") {
  const CameraIntrinsics K = CameraIntrinsics::centered(600, 640, 480);
  NormalizedPose n;
  Pose p = denormalize(n, K, {});
  CHECK(p.R == Mat3::Identity());
  CHECK(p.t == Vec3(0, 0, 1.5));

  n.tx_n = 0.5;
  n.tz_n = -0.3;
  p = denormalize(n, K, {});
  CHECK(p.t.z() == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(p.t.x() == doctest::Approx(640 * 1.2 / 600 * 0.5).epsilon(1e-15));
  CHECK(p.t.x() == doctest::Approx(0.64).epsilon(1e-15));

  n.tz_n = -1.5;
  CHECK_THROWS_AS(denormalize(n, K, {}), Error);
  n.tz_n = 0.0;
  n.rot6.setZero();
  try {
    denormalize(n, K, {});
    FAIL("expected DegenerateRotation6D");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateRotation6D);
  }
}

TEST_CASE("round trip over random valid poses") {
  std::mt19937_64 rng(21);
  const NormConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const CameraIntrinsics K = testsupport::random_intrinsics(rng);
    const Pose p = testsupport::visible_pose(rng, K, cfg.z_min, cfg.z_max);
    const Pose q = denormalize(normalize(p, K, cfg), K, cfg);
    worst = std::max(worst, testsupport::pose_err(p, q));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("tx_n depends only on the fractional image position") {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 200; ++i) {
    const double f = uniform(rng, 300, 1200);
    const double w = uniform(rng, 320, 1920);
    const double h = uniform(rng, 240, 1080);
    const CameraIntrinsics K = CameraIntrinsics::centered(f, w, h);
    const double z = uniform(rng, 0.3, 3.0);
    Pose p;
    p.t = {(0.75 * w - K.cx) * z / f, (0.4 * h - K.cy) * z / f, z};
    const NormalizedPose n = normalize(p, K, {});
    CHECK(n.tx_n == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(n.ty_n == doctest::Approx(-0.1).epsilon(1e-12));
  }
}

TEST_CASE("changing rotation leaves normalized translation unchanged") {
  std::mt19937_64 rng(23);
  const CameraIntrinsics K;
  for (int i = 0; i < 500; ++i) {
    Pose a = testsupport::visible_pose(rng, K);
    Pose b = a;
    b.R = testsupport::quat_rotation(rng);
    const NormalizedPose na = normalize(a, K, {});
    const NormalizedPose nb = normalize(b, K, {});
    CHECK(na.translation() == nb.translation());
  }
}

TEST_CASE("vector layout and config validation") {
  NormalizedPose n;
  n.rot6 << 1, 2, 3, 4, 5, 6;
  n.tx_n = 7;
  n.ty_n = 8;
  n.tz_n = 9;
  const Vec9 v = n.to_vector();
  for (int i = 0; i < 9; ++i) CHECK(v(i) == i + 1);
  const NormalizedPose back = NormalizedPose::from_vector(v);
  CHECK(back.to_vector() == v);

  CHECK_NOTHROW(NormConfig{}.validate());
  CHECK_THROWS_AS((NormConfig{0.2, 0.3, 3.0}.validate()), Error);
  CHECK_THROWS_AS((NormConfig{1.5, 0.0, 3.0}.validate()), Error);
  CHECK_THROWS_AS((NormConfig{3.5, 0.3, 3.0}.validate()), Error);
}
