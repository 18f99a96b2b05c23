#include "monose3/robot_chain.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "monose3/errors.hpp"

namespace monose3 {

using nlohmann::json;

ChainSpec ChainSpec::franka_like() {
  ChainSpec spec;
  spec.link_lengths = {0.33, 0.32, 0.21, 0.21, 0.18, 0.11, 0.10};
  for (int i = 0; i < 7; ++i) {
    spec.joint_axes.push_back(i % 2 == 0 ? Vec3::UnitZ() : Vec3::UnitY());
  }
  return spec;
}

void ChainSpec::validate() const {
  if (link_lengths.empty()) {
    throw Error(ErrorCode::InvalidConfig, "chain needs at least one link");
  }
  if (joint_axes.size() != link_lengths.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "chain has " + std::to_string(link_lengths.size()) + " links but " +
                    std::to_string(joint_axes.size()) + " joint axes");
  }
  for (double l : link_lengths) {
    if (!(l > 0.0)) throw Error(ErrorCode::InvalidConfig, "link lengths must be > 0");
  }
  for (const Vec3& a : joint_axes) {
    if (std::abs(a.norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidConfig, "joint axes must be unit vectors");
    }
  }
  if (std::abs(extension_axis.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig, "extension axis must be a unit vector");
  }
  if (!(joint_limit > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "joint limit must be > 0");
  }
}

namespace {

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::InvalidConfig, "expected a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

ChainSpec ChainSpec::from_json(const std::string& text) {
  ChainSpec spec;
  try {
    const json doc = json::parse(text);
    spec.link_lengths = doc.at("link_lengths").get<std::vector<double>>();
    if (doc.contains("joint_axes")) {
      for (const json& a : doc.at("joint_axes")) spec.joint_axes.push_back(vec3_from_json(a));
    } else {
      for (std::size_t i = 0; i < spec.link_lengths.size(); ++i) {
        spec.joint_axes.push_back(i % 2 == 0 ? Vec3::UnitZ() : Vec3::UnitY());
      }
    }
    if (doc.contains("extension_axis")) {
      spec.extension_axis = vec3_from_json(doc.at("extension_axis"));
    }
    spec.joint_limit = doc.value("joint_limit", spec.joint_limit);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad chain spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ChainSpec ChainSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open chain spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ChainSpec::to_json() const {
  json doc;
  doc["link_lengths"] = link_lengths;
  json axes = json::array();
  for (const Vec3& a : joint_axes) axes.push_back({a.x(), a.y(), a.z()});
  doc["joint_axes"] = axes;
  doc["extension_axis"] = {extension_axis.x(), extension_axis.y(), extension_axis.z()};
  doc["joint_limit"] = joint_limit;
  return doc.dump();
}

std::vector<Vec3> forward_kinematics(const ChainSpec& spec, const JointConfig& j) {
  if (static_cast<int>(j.angles.size()) != spec.n_joints()) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(spec.n_joints()) + " joint angles, got " +
                    std::to_string(j.angles.size()));
  }
  std::vector<Vec3> kp;
  kp.reserve(spec.link_lengths.size() + 1);
  kp.push_back(Vec3::Zero());
  Mat3 R = Mat3::Identity();
  for (std::size_t i = 0; i < spec.link_lengths.size(); ++i) {
    R = R * Eigen::AngleAxisd(j.angles[i], spec.joint_axes[i]).toRotationMatrix();
    kp.push_back(kp.back() + R * (spec.link_lengths[i] * spec.extension_axis));
  }
  return kp;
}

std::vector<Vec3> sample_points(const ChainSpec& spec, const JointConfig& j, int per_link) {
  if (per_link < 1) throw Error(ErrorCode::InvalidRange, "per_link must be >= 1");
  const std::vector<Vec3> kp = forward_kinematics(spec, j);
  std::vector<Vec3> pts;
  pts.reserve(kp.size() + (kp.size() - 1) * static_cast<std::size_t>(per_link));
  for (std::size_t i = 0; i + 1 < kp.size(); ++i) {
    pts.push_back(kp[i]);
    for (int k = 1; k <= per_link; ++k) {
      const double s = static_cast<double>(k) / (per_link + 1);
      pts.push_back(kp[i] + s * (kp[i + 1] - kp[i]));
    }
  }
  pts.push_back(kp.back());
  return pts;
}

std::vector<Vec3> loss_points(const ChainSpec& spec, const JointConfig& j, int count) {
  if (count < 0) throw Error(ErrorCode::InvalidRange, "point count must be >= 0");
  std::vector<Vec3> pts = forward_kinematics(spec, j);
  const double total = std::accumulate(spec.link_lengths.begin(), spec.link_lengths.end(), 0.0);
  std::size_t link = 0;
  double link_start = 0.0;
  for (int k = 0; k < count; ++k) {
    const double s = (k + 0.5) / count * total;
    while (link + 1 < spec.link_lengths.size() && s > link_start + spec.link_lengths[link]) {
      link_start += spec.link_lengths[link];
      ++link;
    }
    const double frac = (s - link_start) / spec.link_lengths[link];
    const Vec3 p = pts[link] + frac * (pts[link + 1] - pts[link]);
    pts.push_back(p);
  }
  return pts;
}

}  // namespace monose3
