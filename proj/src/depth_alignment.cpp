#include "scenefield/depth_alignment.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace scenefield {

namespace {

void check_shapes(const DepthMap& a, const DepthMap& b, const BoolArray& mask, const char* who) {
  if (!a.same_shape(b.width, b.height) || mask.size() != a.size()) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
  }
}

// Tiny pull toward the identity field keeps the normal equations definite when the overlap does
// not constrain scale and offset separately.
constexpr double kAnchor = 1e-8;

}  // namespace

std::vector<PointPair> sample_pairs(const DepthMap& rendered, const DepthMap& estimated,
                                    const BoolArray& overlap, const Intrinsicsd& intrinsics,
                                    std::size_t max_pairs, std::uint64_t seed) {
  check_shapes(rendered, estimated, overlap, "sample_pairs");
  std::vector<Eigen::Index> pool;
  for (Eigen::Index p = 0; p < overlap.size(); ++p) {
    if (overlap[p] && rendered.valid[p] && estimated.valid[p]) pool.push_back(p);
  }
  if (pool.empty()) throw AlignmentError("sample_pairs: empty overlap, alignment impossible");

  const std::size_t m = std::min(max_pairs, pool.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }

  std::vector<PointPair> pairs;
  pairs.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Index p = pool[i];
    const Vec2 q = Intrinsicsd::pixel_center(int(p % rendered.width), int(p / rendered.width));
    pairs.push_back({intrinsics.unproject(q, rendered.values[p]),
                     intrinsics.unproject(q, estimated.values[p]), p});
  }
  return pairs;
}

GlobalAlignment global_align(const std::vector<PointPair>& pairs) {
  if (pairs.size() < 2) throw AlignmentError("global_align: need at least two pairs for the scale");
  double ratio_sum = 0.0;
  std::size_t ratios = 0;
  for (std::size_t j = 0; j + 1 < pairs.size(); ++j) {
    const double den = (pairs[j].estimated - pairs[j + 1].estimated).norm();
    if (den < 1e-9) continue;
    ratio_sum += (pairs[j].rendered - pairs[j + 1].rendered).norm() / den;
    ++ratios;
  }
  if (ratios == 0) throw AlignmentError("global_align: all consecutive estimated points coincide");

  GlobalAlignment out;
  out.scale = ratio_sum / double(ratios);
  double offset = 0.0;
  for (const PointPair& p : pairs) offset += p.rendered.z() - out.scale * p.estimated.z();
  out.offset = offset / double(pairs.size());
  return out;
}

DepthMap apply_global(const DepthMap& depth, const GlobalAlignment& alignment) {
  DepthMap out(depth.width, depth.height);
  for (Eigen::Index p = 0; p < depth.size(); ++p) {
    if (!depth.valid[p]) continue;
    const double z = alignment.scale * depth.values[p] + alignment.offset;
    if (z > 0.0) out.set(p, z);
  }
  return out;
}

CorrectionField::CorrectionField(int width, int height, int lattice)
    : width_(width), height_(height), lattice_(lattice),
      scales_(Eigen::VectorXd::Ones(Eigen::Index(lattice) * lattice)),
      offsets_(Eigen::VectorXd::Zero(Eigen::Index(lattice) * lattice)) {
  if (width < 1 || height < 1 || lattice < 2) {
    throw std::invalid_argument("CorrectionField: need a non-empty image and lattice >= 2");
  }
}

CorrectionField::Stencil CorrectionField::stencil(int x, int y) const {
  const int last = lattice_ - 1;
  const double gx = (x + 0.5) / width_ * last;
  const double gy = (y + 0.5) / height_ * last;
  const int ix = std::min(int(gx), last - 1);
  const int iy = std::min(int(gy), last - 1);
  const double fx = gx - ix;
  const double fy = gy - iy;
  const Eigen::Index base = Eigen::Index(iy) * lattice_ + ix;
  return {{base, base + 1, base + lattice_, base + lattice_ + 1},
          {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy}};
}

std::pair<double, double> CorrectionField::at(int x, int y) const {
  const Stencil s = stencil(x, y);
  double a = 0.0;
  double b = 0.0;
  for (int c = 0; c < 4; ++c) {
    a += s.weights[c] * scales_[s.nodes[c]];
    b += s.weights[c] * offsets_[s.nodes[c]];
  }
  return {a, b};
}

DepthMap CorrectionField::apply(const DepthMap& depth) const {
  if (!depth.same_shape(width_, height_)) throw std::invalid_argument("CorrectionField: shape mismatch");
  DepthMap out(depth.width, depth.height);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const Eigen::Index p = depth.index(x, y);
      if (!depth.valid[p]) continue;
      const auto [a, b] = at(x, y);
      const double z = a * depth.values[p] + b;
      if (z > 0.0) out.set(p, z);
    }
  }
  return out;
}

bool CorrectionField::is_identity() const {
  return (scales_.array() == 1.0).all() && (offsets_.array() == 0.0).all();
}

double overlap_rmse(const DepthMap& a, const DepthMap& b, const BoolArray& overlap) {
  check_shapes(a, b, overlap, "overlap_rmse");
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index p = 0; p < overlap.size(); ++p) {
    if (!overlap[p] || !a.valid[p] || !b.valid[p]) continue;
    const double d = a.values[p] - b.values[p];
    sum += d * d;
    ++n;
  }
  return n > 0 ? std::sqrt(sum / double(n)) : 0.0;
}

namespace {

// Unknowns are ordered [scale_0, offset_0, scale_1, offset_1, ...].
Eigen::VectorXd solve_field(const DepthMap& global, const DepthMap& rendered,
                            const BoolArray& overlap, const CorrectionField& layout,
                            double smoothness) {
  const Eigen::Index nodes = layout.node_count();
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(2 * nodes, 2 * nodes);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * nodes);

  Eigen::Index count = 0;
  for (Eigen::Index p = 0; p < overlap.size(); ++p) {
    if (overlap[p] && global.valid[p] && rendered.valid[p]) ++count;
  }
  const double inv = 1.0 / double(count);
  for (int y = 0; y < global.height; ++y) {
    for (int x = 0; x < global.width; ++x) {
      const Eigen::Index p = global.index(x, y);
      if (!overlap[p] || !global.valid[p] || !rendered.valid[p]) continue;
      const auto s = layout.stencil(x, y);
      std::array<Eigen::Index, 8> idx;
      std::array<double, 8> row;
      for (int c = 0; c < 4; ++c) {
        idx[2 * c] = 2 * s.nodes[c];
        idx[2 * c + 1] = 2 * s.nodes[c] + 1;
        row[2 * c] = s.weights[c] * global.values[p];
        row[2 * c + 1] = s.weights[c];
      }
      for (int i = 0; i < 8; ++i) {
        rhs[idx[i]] += inv * row[i] * rendered.values[p];
        for (int j = 0; j < 8; ++j) normal(idx[i], idx[j]) += inv * row[i] * row[j];
      }
    }
  }

  const int n = layout.lattice();
  auto couple = [&](Eigen::Index a, Eigen::Index b) {
    for (int k = 0; k < 2; ++k) {
      const Eigen::Index i = 2 * a + k;
      const Eigen::Index j = 2 * b + k;
      normal(i, i) += smoothness;
      normal(j, j) += smoothness;
      normal(i, j) -= smoothness;
      normal(j, i) -= smoothness;
    }
  };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Eigen::Index node = Eigen::Index(r) * n + c;
      if (c + 1 < n) couple(node, node + 1);
      if (r + 1 < n) couple(node, node + n);
      normal(2 * node, 2 * node) += kAnchor;
      rhs[2 * node] += kAnchor;
      normal(2 * node + 1, 2 * node + 1) += kAnchor;
    }
  }
  return normal.ldlt().solve(rhs);
}

}  // namespace

LocalAlignment local_align(const DepthMap& global, const DepthMap& rendered,
                           const BoolArray& overlap, const LocalOptions& options) {
  check_shapes(global, rendered, overlap, "local_align");
  if (options.smoothness < 0.0) throw std::invalid_argument("local_align: negative smoothness");

  LocalAlignment out;
  out.field = CorrectionField(global.width, global.height, options.lattice);
  out.depth = global;
  out.rmse_before = overlap_rmse(global, rendered, overlap);
  out.rmse_after = out.rmse_before;

  bool any = false;
  for (Eigen::Index p = 0; p < overlap.size() && !any; ++p) {
    any = overlap[p] && global.valid[p] && rendered.valid[p];
  }
  if (!any) throw AlignmentError("local_align: empty overlap");
  if (out.rmse_before == 0.0) return out;

  double mu = options.smoothness;
  for (int attempt = 0; attempt < 8; ++attempt, mu = std::max(10.0 * mu, 1e-3)) {
    const Eigen::VectorXd sol = solve_field(global, rendered, overlap, out.field, mu);
    if (!sol.allFinite()) {
      std::ostringstream msg;
      msg << "local_align: non-finite correction field (smoothness " << mu << ")";
      throw NumericError(msg.str());
    }
    CorrectionField field(global.width, global.height, options.lattice);
    for (Eigen::Index k = 0; k < field.node_count(); ++k) {
      field.scales()[k] = sol[2 * k];
      field.offsets()[k] = sol[2 * k + 1];
    }
    if ((field.scales().array() <= 0.0).any()) continue;

    DepthMap corrected = field.apply(global);
    const double rmse = overlap_rmse(corrected, rendered, overlap);
    if (rmse < out.rmse_before) {
      out.field = std::move(field);
      out.depth = std::move(corrected);
      out.rmse_after = rmse;
    }
    return out;
  }
  return out;
}

AlignmentResult align_depth(const DepthMap& rendered, const DepthMap& estimated,
                            const BoolArray& overlap, const Intrinsicsd& intrinsics,
                            std::uint64_t seed, const AlignOptions& options) {
  check_shapes(rendered, estimated, overlap, "align_depth");
  AlignmentResult out;
  out.rmse_raw = overlap_rmse(estimated, rendered, overlap);

  std::vector<PointPair> pairs;
  try {
    pairs = sample_pairs(rendered, estimated, overlap, intrinsics, options.max_pairs, seed);
  } catch (const AlignmentError&) {
    out.fallback = true;
    out.global_depth = estimated;
    out.aligned = estimated;
    out.field = CorrectionField(estimated.width, estimated.height, options.local.lattice);
    return out;
  }
  out.pairs = pairs.size();
  try {
    out.global = global_align(pairs);
  } catch (const AlignmentError&) {
    out.global = GlobalAlignment{};
  }
  out.global_depth = apply_global(estimated, out.global);
  out.rmse_global = overlap_rmse(out.global_depth, rendered, overlap);
  // A global estimate that makes things worse than the raw map is discarded.
  if (out.rmse_global > out.rmse_raw) {
    out.global = GlobalAlignment{};
    out.global_depth = estimated;
    out.rmse_global = out.rmse_raw;
  }

  if (options.enable_local) {
    LocalAlignment local = local_align(out.global_depth, rendered, overlap, options.local);
    out.aligned = std::move(local.depth);
    out.field = std::move(local.field);
    out.rmse_local = local.rmse_after;
  } else {
    out.aligned = out.global_depth;
    out.field = CorrectionField(estimated.width, estimated.height, options.local.lattice);
    out.rmse_local = out.rmse_global;
  }
  return out;
}

DepthMap distort_depth(const DepthMap& depth, double tau1, double tau2) {
  if (!(tau2 > 0.0)) throw std::invalid_argument("distort_depth: tau2 must be positive");
  DepthMap out(depth.width, depth.height);
  for (Eigen::Index p = 0; p < depth.size(); ++p) {
    if (!depth.valid[p]) continue;
    const double d = depth.values[p];
    out.set(p, (d + tau1) * std::pow(d, 1.0 / tau2));
  }
  return out;
}

Distortion sample_distortion(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> t1(0.0, 1.0);
  std::uniform_real_distribution<double> t2(30.0, 50.0);
  Distortion d;
  d.tau1 = t1(rng);
  d.tau2 = t2(rng);
  return d;
}

}  // namespace scenefield
