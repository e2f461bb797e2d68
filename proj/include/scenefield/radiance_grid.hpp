#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "scenefield/types.hpp"

namespace scenefield {

using Box3 = Eigen::AlignedBox3d;
/// Per-node parameter block laid out as [density, red, green, blue].
using NodeMatrix = Eigen::Matrix<double, 4, Eigen::Dynamic>;

[[nodiscard]] inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}
[[nodiscard]] inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
[[nodiscard]] inline double inverse_softplus(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}
[[nodiscard]] inline double inverse_logistic(double y) { return std::log(y / (1.0 - y)); }

struct GridOptions {
  double density_scale = 25.0; // sigma = density_scale * softplus(raw)
  double initial_density = 0.05;
  double initial_color = 0.5;
};

/// Dense lattice of density/color nodes spanning `bbox` (nodes sit on the box corners and are
/// evenly spaced). Parameters are unconstrained; density goes through a scaled softplus and color
/// through a logistic. Activated values are cached and kept in sync by every mutator.
class RadianceGrid {
 public:
  RadianceGrid() = default;
  RadianceGrid(const Box3& bbox, const Vec3i& resolution, const GridOptions& options = {});
  /// Rebuilds a grid from raw parameters (checkpoint load).
  RadianceGrid(const Box3& bbox, const Vec3i& resolution, double density_scale, NodeMatrix raw);

  [[nodiscard]] const Box3& bbox() const { return bbox_; }
  [[nodiscard]] const Vec3i& resolution() const { return resolution_; }
  [[nodiscard]] Eigen::Index node_count() const { return raw_.cols(); }
  [[nodiscard]] Eigen::Index parameter_count() const { return raw_.size(); }
  [[nodiscard]] double density_scale() const { return density_scale_; }
  [[nodiscard]] const Vec3& spacing() const { return spacing_; }

  [[nodiscard]] const NodeMatrix& raw() const { return raw_; }
  /// Activated [sigma, r, g, b] per node.
  [[nodiscard]] const NodeMatrix& activated() const { return activated_; }
  /// d sigma / d raw per node.
  [[nodiscard]] const Eigen::VectorXd& density_slope() const { return density_slope_; }

  [[nodiscard]] double parameter(Eigen::Index k) const { return raw_.data()[k]; }
  void set_parameter(Eigen::Index k, double value);
  void set_node(Eigen::Index node, const Eigen::Vector4d& raw);
  /// Applies `raw.col(n) += delta.col(n)` for the listed nodes.
  void add_to_nodes(const std::vector<Eigen::Index>& nodes, const NodeMatrix& delta);

  [[nodiscard]] Eigen::Index node_index(int i, int j, int k) const {
    return (Eigen::Index(k) * resolution_.y() + j) * resolution_.x() + i;
  }
  [[nodiscard]] Vec3 node_position(int i, int j, int k) const {
    return bbox_.min() + spacing_.cwiseProduct(Vec3(i, j, k));
  }

  /// Stored activated values of a node.
  [[nodiscard]] std::pair<double, Vec3> node_value(Eigen::Index node) const {
    return {activated_(0, node), activated_.col(node).tail<3>()};
  }

  /// Lattice cell containing `x` (clamped to the grid) and the fractional position inside it.
  /// Precondition: x lies in the bounding box.
  struct Cell {
    Eigen::Index base;
    Vec3 frac;
  };
  [[nodiscard]] Cell locate(const Vec3& x) const;

  /// Node index offsets of the eight cell corners in (dx, dy, dz) bit order.
  [[nodiscard]] const std::array<Eigen::Index, 8>& corner_offsets() const { return corners_; }

  [[nodiscard]] bool operator==(const RadianceGrid& other) const;

 private:
  void refresh(Eigen::Index node);
  void init_geometry();

  Box3 bbox_;
  Vec3i resolution_ = Vec3i::Zero();
  Vec3 spacing_ = Vec3::Zero();
  double density_scale_ = 25.0;
  NodeMatrix raw_;
  NodeMatrix activated_;
  Eigen::VectorXd density_slope_;
  std::array<Eigen::Index, 8> corners_{};
};

struct FieldSample {
  double density = 0.0;
  Vec3 color = Vec3::Zero();
};

/// Trilinear interpolation of activated node values; zero density and black outside the box.
[[nodiscard]] FieldSample query(const RadianceGrid& grid, const Vec3& x);

}  // namespace scenefield
