#include "scenefield/volume_render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "parallel.hpp"

namespace scenefield {

Rayd camera_ray(const CameraViewd& view, int x, int y) {
  const Vec3 cam = view.intrinsics.unproject(Intrinsicsd::pixel_center(x, y), 1.0);
  const double norm = cam.norm();
  Rayd ray;
  ray.origin = view.pose.center();
  ray.direction = view.pose.rotation.transpose() * (cam / norm);
  ray.z_scale = 1.0 / norm;
  return ray;
}

RayInterval clip_to_box(const Rayd& ray, const Box3& box) {
  double t0 = ray.t_near;
  double t1 = ray.t_far;
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    const double o = ray.origin[a];
    if (d == 0.0) {
      if (o < box.min()[a] || o > box.max()[a]) return {0.0, 0.0};
      continue;
    }
    double ta = (box.min()[a] - o) / d;
    double tb = (box.max()[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return {t0, t1};
}

const RenderSample& RayTape::forward(const RadianceGrid& grid, const Rayd& ray, int steps,
                                     bool keep_trace) {
  if (steps < 2) throw std::invalid_argument("render_ray: need at least 2 steps");
  grid_ = &grid;
  z_scale_ = ray.z_scale;
  result_ = RenderSample{};
  const RayInterval span = clip_to_box(ray, grid.bbox());
  const std::size_t n = span.empty() ? 0 : std::size_t(steps);
  base_.resize(n);
  frac_.resize(n);
  t_.resize(n);
  sigma_.resize(n);
  color_.resize(n);
  trans_.resize(n);
  decay_.resize(n);
  delta_ = span.empty() ? 0.0 : (span.t_far - span.t_near) / steps;
  limit_ = span.empty() ? std::numeric_limits<double>::infinity()
                        : span.t_far - grid.spacing().maxCoeff();

  const double* act = grid.activated().data();
  const auto& corners = grid.corner_offsets();
  double transmittance = 1.0;
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = span.t_near + (double(i) + 0.5) * delta_;
    const auto cell = grid.locate(ray.at(t));
    const Vec3& f = cell.frac;
    Eigen::Vector4d v = Eigen::Vector4d::Zero();
    for (int c = 0; c < 8; ++c) {
      const double w = ((c & 1) ? f.x() : 1.0 - f.x()) * ((c & 2) ? f.y() : 1.0 - f.y()) *
                       ((c & 4) ? f.z() : 1.0 - f.z());
      v += w * Eigen::Map<const Eigen::Vector4d>(act + 4 * (cell.base + corners[c]));
    }
    const double decay = std::exp(-v[0] * delta_);
    const double weight = transmittance * (1.0 - decay);
    base_[i] = cell.base;
    frac_[i] = f;
    t_[i] = t;
    sigma_[i] = v[0];
    color_[i] = v.tail<3>();
    trans_[i] = transmittance;
    decay_[i] = decay;
    color += weight * color_[i];
    depth += weight * t;
    weight_sum += weight;
    transmittance *= decay;
  }
  result_.color = color;
  result_.depth = depth;
  result_.z_depth = depth * ray.z_scale;
  result_.final_transmittance = transmittance;
  result_.opacity = 1.0 - transmittance;
  result_.weight_sum = weight_sum;
  if (keep_trace) {
    result_.trace.t = t_;
    result_.trace.transmittance = trans_;
    result_.trace.surface_limit = limit_;
  }
  return result_;
}

void RayTape::backward(const RayAdjoint& adjoint, GridGradient& gradient) const {
  const std::size_t n = t_.size();
  if (n == 0) return;
  const bool has_trace = !adjoint.transmittance.empty();
  if (has_trace && adjoint.transmittance.size() != n) {
    throw std::invalid_argument("backprop_ray: transmittance adjoint length mismatch");
  }
  const RadianceGrid& grid = *grid_;
  const double* act = grid.activated().data();
  const double* slope = grid.density_slope().data();
  const auto& corners = grid.corner_offsets();
  const double g_depth = adjoint.z_depth * z_scale_;

  // Suffix sums over samples j > i of w_j * v_j and gT_j * T_j.
  double suffix = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double weight = trans_[k] * (1.0 - decay_[k]);
    const double v = adjoint.color.dot(color_[k]) + g_depth * t_[k];
    const double d_sigma = delta_ * (trans_[k] * decay_[k] * v - suffix);
    const Vec3 d_color = weight * adjoint.color;
    suffix += weight * v;
    if (has_trace) suffix += adjoint.transmittance[k] * trans_[k];

    if (d_sigma == 0.0 && d_color.isZero(0.0)) continue;
    const Vec3& f = frac_[k];
    for (int c = 0; c < 8; ++c) {
      const double w = ((c & 1) ? f.x() : 1.0 - f.x()) * ((c & 2) ? f.y() : 1.0 - f.y()) *
                       ((c & 4) ? f.z() : 1.0 - f.z());
      if (w == 0.0) continue;
      const Eigen::Index node = base_[k] + corners[c];
      const double* a = act + 4 * node;
      Eigen::Vector4d g;
      g[0] = w * d_sigma * slope[node];
      for (int ch = 0; ch < 3; ++ch) g[ch + 1] = w * d_color[ch] * a[ch + 1] * (1.0 - a[ch + 1]);
      gradient.add(node, g);
    }
  }
}

RenderSample render_ray(const RadianceGrid& grid, const Rayd& ray, int steps, bool keep_trace) {
  RayTape tape;
  return tape.forward(grid, ray, steps, keep_trace);
}

void backprop_ray(const RadianceGrid& grid, const Rayd& ray, int steps, const RayAdjoint& adjoint,
                  GridGradient& gradient) {
  RayTape tape;
  tape.forward(grid, ray, steps);
  tape.backward(adjoint, gradient);
}

RenderedView render_view(const RadianceGrid& grid, const CameraViewd& view, int steps,
                         double opacity_floor, bool keep_traces) {
  const int w = view.width();
  const int h = view.height();
  RenderedView out{RgbImage(w, h), DepthMap(w, h), Eigen::VectorXd::Zero(Eigen::Index(w) * h),
                   Eigen::VectorXd::Zero(Eigen::Index(w) * h), {}};
  if (keep_traces) out.traces.resize(std::size_t(w) * h);
  detail::parallel_for(h, [&](long y0, long y1) {
    RayTape tape;
    for (long y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const Eigen::Index p = out.image.index(x, int(y));
        const RenderSample& s = tape.forward(grid, camera_ray(view, x, int(y)), steps, keep_traces);
        out.image.pixels.row(p) = s.color.transpose();
        out.z_depth[p] = s.z_depth;
        out.opacity[p] = s.opacity;
        // Surface depth: expected z given the ray terminates. The weight-summed z shrinks toward
        // the camera by the missing opacity, which would bias every comparison with a map.
        if (s.opacity >= opacity_floor && s.z_depth > 0.0) out.depth.set(p, s.z_depth / s.opacity);
        if (keep_traces) out.traces[std::size_t(p)] = s.trace;
      }
    }
  });
  return out;
}

GridGradient::GridGradient(Eigen::Index nodes)
    : values_(NodeMatrix::Zero(4, nodes)), stamp_(std::size_t(nodes), 0) {}

void GridGradient::clear() {
  for (Eigen::Index n : touched_) values_.col(n).setZero();
  touched_.clear();
  if (++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    epoch_ = 1;
  }
}

void GridGradient::merge(const GridGradient& other) {
  for (Eigen::Index n : other.touched_) add(n, other.values_.col(n));
}

GridGradient render_with_gradients(const RadianceGrid& grid, const CameraViewd& view, int steps,
                                   const ViewAdjoints& adjoints) {
  const Eigen::Index pixels = Eigen::Index(view.width()) * view.height();
  if (adjoints.color.rows() != pixels || adjoints.z_depth.size() != pixels ||
      (!adjoints.transmittance.empty() && Eigen::Index(adjoints.transmittance.size()) != pixels)) {
    throw std::invalid_argument("render_with_gradients: adjoint shape does not match the view");
  }
  GridGradient gradient(grid.node_count());
  RayTape tape;
  for (int y = 0; y < view.height(); ++y) {
    for (int x = 0; x < view.width(); ++x) {
      const Eigen::Index p = Eigen::Index(y) * view.width() + x;
      RayAdjoint adj;
      adj.color = adjoints.color.row(p).transpose();
      adj.z_depth = adjoints.z_depth[p];
      if (!adjoints.transmittance.empty()) adj.transmittance = adjoints.transmittance[std::size_t(p)];
      if (adj.color.isZero(0.0) && adj.z_depth == 0.0 &&
          std::all_of(adj.transmittance.begin(), adj.transmittance.end(),
                      [](double g) { return g == 0.0; })) {
        continue;
      }
      tape.forward(grid, camera_ray(view, x, y), steps);
      tape.backward(adj, gradient);
    }
  }
  return gradient;
}

}  // namespace scenefield
