#pragma once

// Helpers shared by the test executables.

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "scenefield/camera.hpp"
#include "scenefield/oracle_scene.hpp"
#include "scenefield/radiance_grid.hpp"
#include "scenefield/types.hpp"

namespace scenefield::testing {

inline CameraViewd make_view(int w, int h, const Vec3& center = Vec3::Zero(), double yaw = 0.0,
                             double pitch = 0.0, double hfov = 90.0, int id = 0) {
  return {Intrinsicsd::from_fov(w, h, hfov), Posed::from_yaw_pitch(center, yaw, pitch), id};
}

/// Grid with every raw parameter drawn uniformly from [lo, hi].
inline RadianceGrid random_grid(int n, std::uint64_t seed, double lo = -1.5, double hi = 1.5,
                                const Box3& box = Box3(Vec3::Constant(-1.0), Vec3::Constant(1.0))) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  NodeMatrix raw(4, Eigen::Index(n) * n * n);
  for (Eigen::Index k = 0; k < raw.size(); ++k) raw.data()[k] = u(rng);
  return RadianceGrid(box, Vec3i::Constant(n), 25.0, std::move(raw));
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("scenefield_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Ground-truth visibility oracle: true when the surface point seen by `dst` at pixel (x, y) is
/// also the first surface on the source ray through it, and projects inside the source frame.
inline bool seen_by(const OracleScene& scene, const CameraViewd& src, const CameraViewd& dst, int x,
                    int y) {
  const Vec3 origin = dst.pose.center();
  const Vec3 dir_cam = dst.intrinsics.unproject(Intrinsicsd::pixel_center(x, y), 1.0).normalized();
  const std::optional<OracleHit> hit = scene.trace(origin, dst.pose.rotation.transpose() * dir_cam);
  if (!hit) return false;
  const Vec3 cam = src.pose.to_camera(hit->point);
  if (cam.z() <= 0.0) return false;
  const Vec2 q = src.intrinsics.project(cam);
  if (q.x() < 0.0 || q.y() < 0.0 || q.x() >= src.width() || q.y() >= src.height()) return false;
  const Vec3 to_point = hit->point - src.pose.center();
  const std::optional<OracleHit> back = scene.trace(src.pose.center(), to_point.normalized());
  return back && back->t >= to_point.norm() - 1e-6;
}

}  // namespace scenefield::testing
