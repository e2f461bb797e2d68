#include "scenefield/radiance_grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace scenefield {

RadianceGrid::RadianceGrid(const Box3& bbox, const Vec3i& resolution, const GridOptions& options)
    : bbox_(bbox), resolution_(resolution), density_scale_(options.density_scale) {
  if (!(options.initial_density > 0.0) || !(options.initial_color > 0.0 && options.initial_color < 1.0)) {
    throw std::invalid_argument("RadianceGrid: initial density must be > 0 and color in (0,1)");
  }
  init_geometry();
  Eigen::Vector4d init;
  init << inverse_softplus(options.initial_density / density_scale_),
      Eigen::Vector3d::Constant(inverse_logistic(options.initial_color));
  raw_ = init.replicate(1, Eigen::Index(resolution.prod()));
  activated_.resize(4, raw_.cols());
  density_slope_.resize(raw_.cols());
  for (Eigen::Index n = 0; n < raw_.cols(); ++n) refresh(n);
}

RadianceGrid::RadianceGrid(const Box3& bbox, const Vec3i& resolution, double density_scale,
                           NodeMatrix raw)
    : bbox_(bbox), resolution_(resolution), density_scale_(density_scale), raw_(std::move(raw)) {
  init_geometry();
  if (raw_.cols() != Eigen::Index(resolution.prod())) {
    throw std::invalid_argument("RadianceGrid: parameter count does not match resolution");
  }
  activated_.resize(4, raw_.cols());
  density_slope_.resize(raw_.cols());
  for (Eigen::Index n = 0; n < raw_.cols(); ++n) refresh(n);
}

void RadianceGrid::init_geometry() {
  if ((resolution_.array() < 2).any()) throw std::invalid_argument("RadianceGrid: need >= 2 nodes per axis");
  if (!((bbox_.max() - bbox_.min()).array() > 0.0).all()) {
    throw std::invalid_argument("RadianceGrid: bounding box must have positive extent");
  }
  if (!(density_scale_ > 0.0)) throw std::invalid_argument("RadianceGrid: density scale must be > 0");
  spacing_ = (bbox_.max() - bbox_.min()).cwiseQuotient((resolution_ - Vec3i::Ones()).cast<double>());
  for (int c = 0; c < 8; ++c) {
    corners_[c] = node_index(c & 1, (c >> 1) & 1, (c >> 2) & 1);
  }
}

void RadianceGrid::refresh(Eigen::Index n) {
  const double s = raw_(0, n);
  activated_(0, n) = density_scale_ * softplus(s);
  density_slope_[n] = density_scale_ * logistic(s);
  for (int c = 1; c < 4; ++c) activated_(c, n) = logistic(raw_(c, n));
}

void RadianceGrid::set_parameter(Eigen::Index k, double value) {
  raw_.data()[k] = value;
  refresh(k / 4);
}

void RadianceGrid::set_node(Eigen::Index node, const Eigen::Vector4d& raw) {
  raw_.col(node) = raw;
  refresh(node);
}

void RadianceGrid::add_to_nodes(const std::vector<Eigen::Index>& nodes, const NodeMatrix& delta) {
  for (Eigen::Index n : nodes) {
    raw_.col(n) += delta.col(n);
    refresh(n);
  }
}

RadianceGrid::Cell RadianceGrid::locate(const Vec3& x) const {
  Cell cell{};
  Eigen::Index idx[3];
  for (int a = 0; a < 3; ++a) {
    const double g = (x[a] - bbox_.min()[a]) / spacing_[a];
    const double fl = std::clamp(std::floor(g), 0.0, double(resolution_[a] - 2));
    idx[a] = Eigen::Index(fl);
    cell.frac[a] = std::clamp(g - fl, 0.0, 1.0);
  }
  cell.base = node_index(int(idx[0]), int(idx[1]), int(idx[2]));
  return cell;
}

bool RadianceGrid::operator==(const RadianceGrid& other) const {
  return bbox_.isApprox(other.bbox_, 0.0) && resolution_ == other.resolution_ &&
         density_scale_ == other.density_scale_ && raw_ == other.raw_;
}

FieldSample query(const RadianceGrid& grid, const Vec3& x) {
  if (!grid.bbox().contains(x)) return {};
  const auto cell = grid.locate(x);
  const auto& act = grid.activated();
  const auto& corners = grid.corner_offsets();
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  for (int c = 0; c < 8; ++c) {
    const double w = ((c & 1) ? cell.frac.x() : 1.0 - cell.frac.x()) *
                     ((c & 2) ? cell.frac.y() : 1.0 - cell.frac.y()) *
                     ((c & 4) ? cell.frac.z() : 1.0 - cell.frac.z());
    v += w * act.col(cell.base + corners[c]);
  }
  return {v[0], v.tail<3>()};
}

}  // namespace scenefield
