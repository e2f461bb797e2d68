#pragma once

#include <string>
#include <vector>

#include "scenefield/camera.hpp"

namespace scenefield {

/// `count` satellite views on a circle of radius `shift` around the camera center, lying in the
/// camera's own x-y plane (same camera-space z) and sharing the center's orientation. The first
/// satellite sits along camera +x; for count = 8 they are the eight compass directions.
[[nodiscard]] std::vector<CameraViewd> support_poses(const CameraViewd& center, double shift,
                                                     int count);

enum class TrajectoryPattern { orbit, lattice };

struct TrajectorySpec {
  TrajectoryPattern pattern = TrajectoryPattern::orbit;
  int steps = 8;                // orbit: number of poses
  double yaw_step_deg = 45.0;   // orbit and lattice
  double pitch_step_deg = 15.0; // lattice
  int yaw_count = 1;            // lattice: steps on each side of the center
  int pitch_count = 1;          // lattice: steps on each side of the center
};

/// Parses "orbit:steps=8,yaw_step=45" or "lattice:yaw=30,pitch=15[,yaw_count=1,pitch_count=1]".
[[nodiscard]] TrajectorySpec parse_trajectory(const std::string& text);
[[nodiscard]] std::string to_string(const TrajectorySpec& spec);

/// Ordered camera views; element 0 is `origin` itself (id 0), later ids follow list order.
[[nodiscard]] std::vector<CameraViewd> build_trajectory(const TrajectorySpec& spec,
                                                        const CameraViewd& origin);

/// Indices of `views` sorted by angular distance to views[0] (stable, so ties keep list order).
[[nodiscard]] std::vector<std::size_t> nearest_first_order(const std::vector<CameraViewd>& views);

}  // namespace scenefield
