#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>

namespace scenefield {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec3i = Eigen::Vector3i;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;
using ColorMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Dense RGB image in [0,1]. Row p of `pixels` is the pixel at (p % width, p / width).
struct RgbImage {
  int width = 0;
  int height = 0;
  ColorMatrix pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(ColorMatrix::Zero(Eigen::Index(w) * h, 3)) {}

  [[nodiscard]] Eigen::Index size() const { return Eigen::Index(width) * height; }
  [[nodiscard]] Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width + x; }
  [[nodiscard]] bool same_shape(int w, int h) const { return width == w && height == h; }
};

/// Per-pixel camera-space z-depth. Invalid pixels hold 0 and are skipped by every reduction.
struct DepthMap {
  int width = 0;
  int height = 0;
  Eigen::VectorXd values;
  BoolArray valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), values(Eigen::VectorXd::Zero(Eigen::Index(w) * h)),
        valid(BoolArray::Constant(Eigen::Index(w) * h, false)) {}

  [[nodiscard]] Eigen::Index size() const { return Eigen::Index(width) * height; }
  [[nodiscard]] Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width + x; }
  [[nodiscard]] bool same_shape(int w, int h) const { return width == w && height == h; }

  void set(Eigen::Index p, double z) {
    values[p] = z;
    valid[p] = true;
  }
  void invalidate(Eigen::Index p) {
    values[p] = 0.0;
    valid[p] = false;
  }
};

/// Pixels whose content is unknown (true = to be inpainted).
struct RegionMask {
  int width = 0;
  int height = 0;
  BoolArray missing;

  RegionMask() = default;
  RegionMask(int w, int h, bool fill = false)
      : width(w), height(h), missing(BoolArray::Constant(Eigen::Index(w) * h, fill)) {}

  [[nodiscard]] Eigen::Index size() const { return Eigen::Index(width) * height; }
  [[nodiscard]] Eigen::Index count() const { return missing.count(); }
  [[nodiscard]] bool empty() const { return count() == 0; }
};

/// Numeric failure during optimization or alignment (non-finite values).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scenefield
