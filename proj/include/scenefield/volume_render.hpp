#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "scenefield/camera.hpp"
#include "scenefield/radiance_grid.hpp"

namespace scenefield {

template <typename Scalar>
struct Ray {
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Vector3 origin = Vector3::Zero();
  Vector3 direction = Vector3::UnitZ(); // unit length
  Scalar t_near = 0;
  Scalar t_far = std::numeric_limits<Scalar>::infinity();
  /// Camera-space z of the unit direction: z-depth = ray distance * z_scale.
  Scalar z_scale = 1;

  [[nodiscard]] Vector3 at(Scalar t) const { return origin + t * direction; }
};

using Rayd = Ray<double>;

/// Ray through the center of pixel (x, y).
[[nodiscard]] Rayd camera_ray(const CameraViewd& view, int x, int y);

/// Sampling interval of `ray` clipped to the grid box; empty when t_far <= t_near.
struct RayInterval {
  double t_near = 0.0;
  double t_far = 0.0;
  [[nodiscard]] bool empty() const { return !(t_far > t_near); }
};
[[nodiscard]] RayInterval clip_to_box(const Rayd& ray, const Box3& box);

/// Sample positions and transmittance trace of one rendered ray. transmittance[i] is the
/// transmittance arriving at sample i (transmittance[0] == 1).
struct SampleTrace {
  std::vector<double> t;
  std::vector<double> transmittance;
  /// Farthest ray distance at which the grid can still hold a surface: one lattice cell before
  /// the box exit. Free-space targets beyond it are pulled back to it.
  double surface_limit = std::numeric_limits<double>::infinity();
};

struct RenderSample {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;   // expected ray distance
  double z_depth = 0.0; // expected camera-space z
  double opacity = 0.0; // 1 - final transmittance
  double final_transmittance = 1.0;
  double weight_sum = 0.0;
  SampleTrace trace;    // filled only when requested
};

/// Emission-absorption quadrature with `steps` evenly spaced midpoint samples over the ray's
/// interval clipped to the grid box.
[[nodiscard]] RenderSample render_ray(const RadianceGrid& grid, const Rayd& ray, int steps,
                                      bool keep_trace = false);

struct RenderedView {
  RgbImage image;
  DepthMap depth;          // surface z-depth (z_depth / opacity), invalid where opacity < floor
  Eigen::VectorXd z_depth; // weight-summed z-depth for every pixel regardless of opacity
  Eigen::VectorXd opacity;
  std::vector<SampleTrace> traces; // per pixel, only when requested
};

[[nodiscard]] RenderedView render_view(const RadianceGrid& grid, const CameraViewd& view, int steps,
                                       double opacity_floor = 0.5, bool keep_traces = false);

/// Sparse-friendly accumulator for d(loss)/d(raw grid parameters).
class GridGradient {
 public:
  GridGradient() = default;
  explicit GridGradient(Eigen::Index nodes);

  void add(Eigen::Index node, const Eigen::Vector4d& g) {
    if (stamp_[node] != epoch_) {
      stamp_[node] = epoch_;
      touched_.push_back(node);
    }
    values_.col(node) += g;
  }
  void clear();
  void merge(const GridGradient& other);

  [[nodiscard]] const NodeMatrix& values() const { return values_; }
  [[nodiscard]] NodeMatrix& values() { return values_; }
  /// Nodes with a (possibly zero) contribution since the last clear, in first-touch order.
  [[nodiscard]] const std::vector<Eigen::Index>& touched() const { return touched_; }
  [[nodiscard]] double operator[](Eigen::Index k) const { return values_.data()[k]; }

 private:
  NodeMatrix values_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 1;
  std::vector<Eigen::Index> touched_;
};

/// Upstream derivatives for one ray: d(loss)/d(color), d(loss)/d(z-depth) and, optionally,
/// d(loss)/d(transmittance[i]) for every sample.
struct RayAdjoint {
  Vec3 color = Vec3::Zero();
  double z_depth = 0.0;
  std::span<const double> transmittance;
};

/// Reverse-mode pass of render_ray: accumulates exact derivatives with respect to every raw
/// parameter of the nodes the samples touch (through trilinear weights and activations).
void backprop_ray(const RadianceGrid& grid, const Rayd& ray, int steps, const RayAdjoint& adjoint,
                  GridGradient& gradient);

/// Records one forward quadrature so the reverse pass can reuse it. Reusable across rays.
class RayTape {
 public:
  const RenderSample& forward(const RadianceGrid& grid, const Rayd& ray, int steps,
                              bool keep_trace = false);
  /// Reverse pass for the most recent forward() call.
  void backward(const RayAdjoint& adjoint, GridGradient& gradient) const;

  [[nodiscard]] const RenderSample& result() const { return result_; }
  /// Sample distances and arriving transmittance of the last forward() call.
  [[nodiscard]] const std::vector<double>& samples() const { return t_; }
  [[nodiscard]] const std::vector<double>& transmittances() const { return trans_; }
  [[nodiscard]] double surface_limit() const { return limit_; }

 private:
  const RadianceGrid* grid_ = nullptr;
  double z_scale_ = 1.0;
  double delta_ = 0.0;
  double limit_ = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> base_;
  std::vector<Vec3> frac_;
  std::vector<double> t_;
  std::vector<double> sigma_;
  std::vector<Vec3> color_;
  std::vector<double> trans_; // transmittance arriving at each sample
  std::vector<double> decay_; // exp(-sigma * delta)
  RenderSample result_;
};

/// Per-pixel adjoints for a whole view. `transmittance` may be empty (no trace adjoints) or
/// hold one vector per pixel matching that pixel's trace length.
struct ViewAdjoints {
  ColorMatrix color;
  Eigen::VectorXd z_depth;
  std::vector<std::vector<double>> transmittance;
};

[[nodiscard]] GridGradient render_with_gradients(const RadianceGrid& grid, const CameraViewd& view,
                                                 int steps, const ViewAdjoints& adjoints);

}  // namespace scenefield
