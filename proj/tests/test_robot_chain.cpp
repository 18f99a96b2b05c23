#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "monose3/errors.hpp"
#include "monose3/robot_chain.hpp"
#include "support.hpp"

using namespace monose3;

namespace {

JointConfig random_joints(std::mt19937_64& rng, int n) {
  JointConfig j;
  for (int i = 0; i < n; ++i) j.angles.push_back(testsupport::uniform(rng, -M_PI, M_PI));
  return j;
}

}  // namespace

TEST_CASE("default chain") {
  const ChainSpec c = ChainSpec::franka_like();
  CHECK(c.n_joints() == 7);
  CHECK(c.link_lengths == std::vector<double>{0.33, 0.32, 0.21, 0.21, 0.18, 0.11, 0.10});
  for (int i = 0; i < 7; ++i) {
    CHECK(c.joint_axes[static_cast<std::size_t>(i)] == (i % 2 == 0 ? Vec3::UnitZ() : Vec3::UnitY()));
  }
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("zero configuration is a straight line of cumulative lengths") {
  const ChainSpec c = ChainSpec::franka_like();
  const auto kp = forward_kinematics(c, JointConfig{std::vector<double>(7, 0.0)});
  REQUIRE(kp.size() == 8);
  CHECK(kp[0] == Vec3::Zero());
  double cum = 0.0;
  for (std::size_t i = 1; i < kp.size(); ++i) {
    cum += c.link_lengths[i - 1];
    CHECK((kp[i] - cum * Vec3::UnitZ()).norm() < 1e-15);
  }
}

TEST_CASE("half turn of the first joint rotates every distal keypoint") {
  const ChainSpec c = ChainSpec::franka_like();
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    JointConfig j = random_joints(rng, 7);
    j.angles[0] = 0.0;
    const auto base = forward_kinematics(c, j);
    j.angles[0] = M_PI;
    const auto turned = forward_kinematics(c, j);
    const Mat3 Rz = Eigen::AngleAxisd(M_PI, Vec3::UnitZ()).toRotationMatrix();
    double len_base = 0.0, len_turned = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK((turned[i] - Rz * base[i]).norm() < 1e-12);
      // reflection through the axis: x and y flip, z stays
      CHECK(turned[i].x() == doctest::Approx(-base[i].x()).epsilon(1e-12));
      CHECK(turned[i].z() == doctest::Approx(base[i].z()).epsilon(1e-12));
      if (i > 0) {
        len_base += (base[i] - base[i - 1]).norm();
        len_turned += (turned[i] - turned[i - 1]).norm();
      }
    }
    CHECK(len_base == doctest::Approx(len_turned).epsilon(1e-12));
  }
}

TEST_CASE("link lengths are preserved for random configurations") {
  const ChainSpec c = ChainSpec::franka_like();
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto kp = forward_kinematics(c, random_joints(rng, 7));
    for (std::size_t i = 1; i < kp.size(); ++i) {
      CHECK(std::abs((kp[i] - kp[i - 1]).norm() - c.link_lengths[i - 1]) < 1e-12);
    }
  }
}

TEST_CASE("forward kinematics checks the joint count") {
  try {
    forward_kinematics(ChainSpec::franka_like(), JointConfig{{0.0, 0.0}});
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("sample_points spacing and count") {
  const ChainSpec c = ChainSpec::franka_like();
  const JointConfig zero{std::vector<double>(7, 0.0)};
  const auto kp = forward_kinematics(c, zero);

  const auto one = sample_points(c, zero, 1);
  CHECK(one.size() == 7 * 1 + 8);
  for (std::size_t i = 0; i < 7; ++i) {
    const Vec3 mid = 0.5 * (kp[i] + kp[i + 1]);
    bool found = false;
    for (const Vec3& p : one) found = found || (p - mid).norm() < 1e-15;
    CHECK(found);
  }

  const auto two = sample_points(c, zero, 2);
  CHECK(two.size() == 7 * 2 + 8);
  double start = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    const double L = c.link_lengths[i];
    for (double frac : {1.0 / 3.0, 2.0 / 3.0}) {
      const Vec3 target = (start + frac * L) * Vec3::UnitZ();
      bool found = false;
      for (const Vec3& p : two) found = found || (p - target).norm() < 1e-14;
      CHECK(found);
    }
    start += L;
  }

  std::mt19937_64 rng(43);
  for (int per = 1; per <= 6; ++per) {
    const JointConfig j = random_joints(rng, 7);
    CHECK(sample_points(c, j, per).size() == static_cast<std::size_t>(7 * per + 8));
    CHECK(sample_points(c, j, per) == sample_points(c, j, per));
  }
  CHECK_THROWS_AS(sample_points(c, zero, 0), Error);
}

TEST_CASE("rigid motions preserve pairwise distances of sampled points") {
  const ChainSpec c = ChainSpec::franka_like();
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = sample_points(c, random_joints(rng, 7), 3);
    Pose T;
    T.R = testsupport::quat_rotation(rng);
    T.t = Vec3(testsupport::uniform(rng, -2, 2), testsupport::uniform(rng, -2, 2), 1.0);
    for (std::size_t a = 0; a < pts.size(); ++a) {
      for (std::size_t b = a + 1; b < pts.size(); ++b) {
        const double d0 = (pts[a] - pts[b]).norm();
        const double d1 = (T.apply(pts[a]) - T.apply(pts[b])).norm();
        CHECK(std::abs(d0 - d1) < 1e-12);
      }
    }
  }
}

TEST_CASE("loss points lie on the links") {
  const ChainSpec c = ChainSpec::franka_like();
  std::mt19937_64 rng(45);
  const JointConfig j = random_joints(rng, 7);
  const auto kp = forward_kinematics(c, j);
  const auto pts = loss_points(c, j, 64);
  CHECK(pts.size() == 64 + 8);
  for (std::size_t i = 0; i < kp.size(); ++i) CHECK(pts[i] == kp[i]);
  for (std::size_t k = kp.size(); k < pts.size(); ++k) {
    double best = 1e9;
    for (std::size_t i = 0; i + 1 < kp.size(); ++i) {
      const Vec3 d = kp[i + 1] - kp[i];
      const double s = std::clamp((pts[k] - kp[i]).dot(d) / d.squaredNorm(), 0.0, 1.0);
      best = std::min(best, (kp[i] + s * d - pts[k]).norm());
    }
    CHECK(best < 1e-12);
  }
}

TEST_CASE("chain spec JSON round trip and file loading") {
  ChainSpec c;
  c.link_lengths = {0.5, 0.25};
  c.joint_axes = {Vec3::UnitX(), Vec3::UnitY()};
  c.extension_axis = Vec3::UnitX();
  const ChainSpec back = ChainSpec::from_json(c.to_json());
  CHECK(back.link_lengths == c.link_lengths);
  CHECK(back.joint_axes == c.joint_axes);
  CHECK(back.extension_axis == c.extension_axis);

  const ChainSpec defaults = ChainSpec::from_json(R"({"link_lengths": [0.1, 0.2, 0.3]})");
  CHECK(defaults.joint_axes.size() == 3);
  CHECK(defaults.joint_axes[1] == Vec3::UnitY());

  const std::string path = "test_robot_chain_spec.json";
  {
    std::ofstream os(path);
    os << c.to_json();
  }
  CHECK(ChainSpec::load(path).link_lengths == c.link_lengths);
  CHECK_THROWS_AS(ChainSpec::load("does/not/exist.json"), Error);

  CHECK_THROWS_AS(ChainSpec::from_json(R"({"link_lengths": [0.1, -0.2]})"), Error);
  CHECK_THROWS_AS(ChainSpec::from_json(R"({"link_lengths": [0.1], "joint_axes": [[0, 0, 2]]})"),
                  Error);
  CHECK_THROWS_AS(ChainSpec::from_json("not json"), Error);
}
