#include "scenefield/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace scenefield {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// key=value pairs after the "pattern:" prefix.
std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& body) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("trajectory: expected key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

}  // namespace

std::vector<CameraViewd> support_poses(const CameraViewd& center, double shift, int count) {
  if (shift < 0.0 || count < 1) throw std::invalid_argument("support_poses: need shift >= 0 and count >= 1");
  std::vector<CameraViewd> out;
  out.reserve(count);
  const Vec3 c = center.pose.center();
  const Mat3 cam_to_world = center.pose.rotation.transpose();
  for (int j = 0; j < count; ++j) {
    const double angle = 2.0 * std::numbers::pi * j / count;
    const Vec3 offset(shift * std::cos(angle), shift * std::sin(angle), 0.0);
    CameraViewd v = center;
    v.pose = Posed::from_center(center.pose.rotation, c + cam_to_world * offset);
    out.push_back(v);
  }
  return out;
}

TrajectorySpec parse_trajectory(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  TrajectorySpec spec;
  if (name == "orbit") {
    spec.pattern = TrajectoryPattern::orbit;
  } else if (name == "lattice") {
    spec.pattern = TrajectoryPattern::lattice;
    spec.yaw_step_deg = 30.0;
  } else {
    throw std::invalid_argument("trajectory: unknown pattern '" + name + "'");
  }
  if (colon == std::string::npos) return spec;
  for (const auto& [key, value] : parse_pairs(text.substr(colon + 1))) {
    if (key == "steps") spec.steps = std::stoi(value);
    else if (key == "yaw_step" || key == "yaw") spec.yaw_step_deg = std::stod(value);
    else if (key == "pitch_step" || key == "pitch") spec.pitch_step_deg = std::stod(value);
    else if (key == "yaw_count") spec.yaw_count = std::stoi(value);
    else if (key == "pitch_count") spec.pitch_count = std::stoi(value);
    else throw std::invalid_argument("trajectory: unknown key '" + key + "'");
  }
  return spec;
}

std::string to_string(const TrajectorySpec& spec) {
  std::ostringstream os;
  if (spec.pattern == TrajectoryPattern::orbit) {
    os << "orbit:steps=" << spec.steps << ",yaw_step=" << spec.yaw_step_deg;
  } else {
    os << "lattice:yaw=" << spec.yaw_step_deg << ",pitch=" << spec.pitch_step_deg
       << ",yaw_count=" << spec.yaw_count << ",pitch_count=" << spec.pitch_count;
  }
  return os.str();
}

std::vector<CameraViewd> build_trajectory(const TrajectorySpec& spec, const CameraViewd& origin) {
  const Vec3 c = origin.pose.center();
  std::vector<CameraViewd> out;
  auto push = [&](double yaw_deg, double pitch_deg) {
    CameraViewd v = origin;
    const Mat3 turn =
        Posed::from_yaw_pitch(Vec3::Zero(), yaw_deg * kDegToRad, pitch_deg * kDegToRad).rotation;
    // Turn relative to the origin camera: the new camera frame is origin_frame * turn.
    v.pose = Posed::from_center(turn * origin.pose.rotation, c);
    v.id = static_cast<int>(out.size());
    out.push_back(v);
  };

  switch (spec.pattern) {
    case TrajectoryPattern::orbit:
      if (spec.steps < 1) throw std::invalid_argument("trajectory: orbit needs steps >= 1");
      for (int i = 0; i < spec.steps; ++i) push(i * spec.yaw_step_deg, 0.0);
      break;
    case TrajectoryPattern::lattice:
      if (spec.yaw_count < 0 || spec.pitch_count < 0) {
        throw std::invalid_argument("trajectory: lattice counts must be >= 0");
      }
      push(0.0, 0.0);
      for (int p = -spec.pitch_count; p <= spec.pitch_count; ++p) {
        for (int y = -spec.yaw_count; y <= spec.yaw_count; ++y) {
          if (p == 0 && y == 0) continue;
          push(y * spec.yaw_step_deg, p * spec.pitch_step_deg);
        }
      }
      break;
  }
  return out;
}

std::vector<std::size_t> nearest_first_order(const std::vector<CameraViewd>& views) {
  std::vector<std::size_t> order(views.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (views.empty()) return order;
  std::vector<double> dist(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    dist[i] = angular_distance(views[0].pose, views[i].pose);
  }
  // Round so that mirrored poses tie exactly and keep list order.
  for (double& d : dist) d = std::round(d * 1e9) / 1e9;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  return order;
}

}  // namespace scenefield
