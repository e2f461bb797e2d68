#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "scenefield/types.hpp"

namespace scenefield {

// Conventions: right-handed, world y points down, the camera looks along +z in camera
// space, pixel (i, j) covers [i, i+1) x [j, j+1) with its center at (i + 0.5, j + 0.5),
// and "depth" always means camera-space z.

template <typename Scalar>
struct Intrinsics {
  using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};
  int width = 0;
  int height = 0;

  /// Pinhole camera with the given horizontal field of view and square pixels.
  static Intrinsics from_fov(int w, int h, Scalar hfov_deg = Scalar(90)) {
    const Scalar half = hfov_deg * std::numbers::pi_v<Scalar> / Scalar(360);
    const Scalar f = Scalar(w) / (Scalar(2) * std::tan(half));
    return {f, f, Scalar(w) / 2, Scalar(h) / 2, w, h};
  }

  [[nodiscard]] bool is_valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width && cy >= 0 &&
           cy < height;
  }

  [[nodiscard]] Matrix3 matrix() const {
    Matrix3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  /// Camera-space point at pixel coordinates `q` with z-depth `z`.
  [[nodiscard]] Vector3 unproject(const Vector2& q, Scalar z) const {
    return {(q.x() - cx) / fx * z, (q.y() - cy) / fy * z, z};
  }

  [[nodiscard]] Vector2 project(const Vector3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  [[nodiscard]] static Vector2 pixel_center(int x, int y) {
    return {Scalar(x) + Scalar(0.5), Scalar(y) + Scalar(0.5)};
  }
};

/// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
template <typename Scalar>
struct Pose {
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  /// Camera at `center` turned by `yaw` about world y and then by `pitch` about camera x
  /// (radians; positive pitch looks up since world y points down).
  static Pose from_yaw_pitch(const Vector3& center, Scalar yaw, Scalar pitch) {
    const Matrix3 cam_to_world =
        (Eigen::AngleAxis<Scalar>(yaw, Vector3::UnitY()) *
         Eigen::AngleAxis<Scalar>(pitch, Vector3::UnitX()))
            .toRotationMatrix();
    return from_center(cam_to_world.transpose(), center);
  }

  static Pose from_center(const Matrix3& world_to_cam, const Vector3& center) {
    return {world_to_cam, -world_to_cam * center};
  }

  [[nodiscard]] Vector3 center() const { return -rotation.transpose() * translation; }
  [[nodiscard]] Vector3 to_camera(const Vector3& world) const { return rotation * world + translation; }
  [[nodiscard]] Vector3 to_world(const Vector3& cam) const {
    return rotation.transpose() * (cam - translation);
  }
  /// Viewing direction (camera +z) in world coordinates.
  [[nodiscard]] Vector3 forward() const { return rotation.row(2).transpose(); }

  [[nodiscard]] bool is_valid(Scalar tol = Scalar(1e-6)) const {
    const bool orthonormal =
        (rotation.transpose() * rotation - Matrix3::Identity()).cwiseAbs().maxCoeff() <= tol;
    return orthonormal && std::abs(rotation.determinant() - Scalar(1)) <= tol;
  }

  [[nodiscard]] Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }
};

template <typename Scalar>
struct CameraView {
  Intrinsics<Scalar> intrinsics;
  Pose<Scalar> pose;
  int id = 0;

  [[nodiscard]] int width() const { return intrinsics.width; }
  [[nodiscard]] int height() const { return intrinsics.height; }
};

using Intrinsicsd = Intrinsics<double>;
using Posed = Pose<double>;
using CameraViewd = CameraView<double>;

/// Reprojects pixel `q` with z-depth `z` from `src` into `dst`. The returned depth is the
/// destination camera-space z and may be <= 0 when the point lies behind `dst`.
template <typename Scalar>
[[nodiscard]] std::pair<Eigen::Matrix<Scalar, 2, 1>, Scalar> warp_pixel(
    const Eigen::Matrix<Scalar, 2, 1>& q, Scalar z, const CameraView<Scalar>& src,
    const CameraView<Scalar>& dst) {
  const auto world = src.pose.to_world(src.intrinsics.unproject(q, z));
  const auto cam = dst.pose.to_camera(world);
  return {dst.intrinsics.project(cam), cam.z()};
}

/// Angle in radians between the viewing directions of two poses.
template <typename Scalar>
[[nodiscard]] Scalar angular_distance(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  const Scalar c = std::clamp(a.forward().dot(b.forward()), Scalar(-1), Scalar(1));
  return std::acos(c);
}

}  // namespace scenefield
