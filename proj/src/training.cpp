#include "scenefield/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "scenefield/dibr.hpp"

namespace scenefield {

LossTerms total_loss(const RadianceGrid& grid, std::span<const SupervisedRay> batch,
                     const LossWeights& weights, const RenderSettings& settings,
                     GridGradient* gradient) {
  LossTerms terms;
  if (batch.empty()) return terms;
  const double inv = 1.0 / double(batch.size());
  const bool want_trans = weights.transmittance != 0.0;

  RayTape tape;
  std::vector<double> d_trans;
  for (const SupervisedRay& r : batch) {
    const RenderSample& s = tape.forward(grid, r.ray, settings.steps);
    const Vec3 diff = s.color - r.color;
    const double dz = s.z_depth - r.target_z;
    terms.rgb += diff.squaredNorm() / 3.0;
    terms.depth += dz * dz;

    double penalty = 0.0;
    if (want_trans) {
      d_trans.resize(tape.samples().size());
      // A surface beyond the box exit would put every sample "in front" and force the ray
      // transparent; it is held in the grid's last cell instead.
      const double target = std::min(r.target_z / r.ray.z_scale, tape.surface_limit());
      penalty = transmittance_penalty(tape.samples(), tape.transmittances(), target, settings.form,
                                      gradient ? std::span<double>(d_trans) : std::span<double>());
      terms.transmittance += penalty;
    }
    if (!gradient) continue;

    RayAdjoint adj;
    adj.color = (2.0 / 3.0) * inv * weights.rgb * diff;
    adj.z_depth = 2.0 * inv * weights.depth * dz;
    if (want_trans) {
      for (double& g : d_trans) g *= inv * weights.transmittance;
      adj.transmittance = d_trans;
    }
    tape.backward(adj, *gradient);
  }
  terms.rgb *= inv;
  terms.depth *= inv;
  terms.transmittance *= inv;
  terms.total = weights.rgb * terms.rgb + weights.depth * terms.depth;
  if (want_trans) terms.total += weights.transmittance * terms.transmittance;
  return terms;
}

LazyAdam::LazyAdam(Eigen::Index nodes, const AdamOptions& options)
    : options_(options), first_(NodeMatrix::Zero(4, nodes)), second_(NodeMatrix::Zero(4, nodes)) {}

void LazyAdam::step(RadianceGrid& grid, const GridGradient& gradient, int iteration,
                    int total_iterations) {
  ++step_;
  const double progress = total_iterations > 1 ? double(iteration) / double(total_iterations - 1) : 0.0;
  const double lr =
      options_.lr_initial * std::pow(options_.lr_final / options_.lr_initial, progress);
  const double c1 = 1.0 - std::pow(options_.beta1, double(step_));
  const double c2 = 1.0 - std::pow(options_.beta2, double(step_));
  const NodeMatrix& g = gradient.values();
  for (Eigen::Index n : gradient.touched()) {
    first_.col(n) = options_.beta1 * first_.col(n) + (1.0 - options_.beta1) * g.col(n);
    second_.col(n) =
        options_.beta2 * second_.col(n) + (1.0 - options_.beta2) * g.col(n).cwiseAbs2();
    const Eigen::Vector4d m = first_.col(n) / c1;
    const Eigen::Vector4d v = second_.col(n) / c2;
    const Eigen::Vector4d step = lr * m.array() / (v.array().sqrt() + options_.epsilon);
    grid.set_node(n, grid.raw().col(n) - step);
  }
}

std::vector<SupervisedRay> supervised_rays(const TrainTarget& target) {
  const int w = target.view.width();
  const int h = target.view.height();
  if (!target.image.same_shape(w, h) || !target.depth.same_shape(w, h) ||
      target.mask.size() != Eigen::Index(w) * h) {
    throw std::invalid_argument("supervised_rays: target grids do not match the view resolution");
  }
  std::vector<SupervisedRay> rays;
  rays.reserve(std::size_t(target.mask.count()));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Index p = target.image.index(x, y);
      if (!target.mask[p]) continue;
      if (!target.depth.valid[p]) {
        throw std::invalid_argument("supervised_rays: supervised pixel has no valid depth");
      }
      rays.push_back({camera_ray(target.view, x, y), target.image.pixels.row(p).transpose(),
                      target.depth.values[p]});
    }
  }
  return rays;
}

FitResult fit(RadianceGrid& grid, std::span<const TrainTarget> targets, const FitOptions& options) {
  if (targets.empty()) throw std::invalid_argument("fit: no training targets");
  FitResult result;
  if (options.iterations <= 0) return result;
  if (options.batch_rays < 1) throw std::invalid_argument("fit: batch_rays must be positive");

  std::vector<SupervisedRay> pool;
  for (const TrainTarget& t : targets) {
    auto rays = supervised_rays(t);
    pool.insert(pool.end(), rays.begin(), rays.end());
  }
  if (pool.empty()) throw std::invalid_argument("fit: targets carry no supervised pixel");

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<SupervisedRay> batch(std::size_t(options.batch_rays));
  GridGradient gradient(grid.node_count());
  LazyAdam adam(grid.node_count(), options.adam);
  result.history.reserve(std::size_t(options.iterations));

  for (int it = 0; it < options.iterations; ++it) {
    for (auto& r : batch) r = pool[pick(rng)];
    gradient.clear();
    const LossTerms terms = total_loss(grid, batch, options.weights, options.render, &gradient);
    if (!std::isfinite(terms.total)) {
      std::ostringstream msg;
      msg << "fit: non-finite loss at iteration " << it << " (rgb " << terms.rgb << ", depth "
          << terms.depth << ", transmittance " << terms.transmittance << ")";
      throw NumericError(msg.str());
    }
    result.history.push_back(terms);
    if (options.on_log && options.log_every > 0 &&
        (it % options.log_every == 0 || it + 1 == options.iterations)) {
      options.on_log(it, terms);
    }
    adam.step(grid, gradient, it, options.iterations);
  }
  return result;
}

std::optional<double> psnr(const ColorMatrix& rendered, const ColorMatrix& target,
                           const BoolArray& mask) {
  if (rendered.rows() != target.rows() || rendered.rows() != mask.size()) {
    throw std::invalid_argument("psnr: shape mismatch");
  }
  const Eigen::Index count = mask.count();
  if (count == 0) return std::nullopt;
  double sum = 0.0;
  for (Eigen::Index p = 0; p < mask.size(); ++p) {
    if (mask[p]) sum += (rendered.row(p) - target.row(p)).squaredNorm();
  }
  const double mse = sum / (3.0 * double(count));
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

EvalReport eval_initialization(const RadianceGrid& grid, std::span<const EvalTarget> targets,
                               int steps) {
  EvalReport report;
  double sum = 0.0;
  int used = 0;
  for (const EvalTarget& t : targets) {
    const RenderedView r = render_view(grid, t.view, steps);
    const auto value = psnr(r.image.pixels, t.image.pixels, t.mask);
    report.per_view.push_back(value);
    if (value) {
      sum += *value;
      ++used;
    }
  }
  report.mean_psnr = used > 0 ? sum / used : 0.0;
  return report;
}

std::vector<CameraViewd> sample_test_poses(const CameraViewd& center, int count, double min_shift,
                                           double max_shift, std::uint64_t seed) {
  if (count < 0 || min_shift < 0.0 || max_shift < min_shift) {
    throw std::invalid_argument("sample_test_poses: bad count or shift range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(min_shift, max_shift);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const Vec3 c = center.pose.center();
  const Mat3 to_world = center.pose.rotation.transpose();
  std::vector<CameraViewd> poses;
  poses.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    const double r = radius(rng);
    const double a = angle(rng);
    CameraViewd v = center;
    v.pose = Posed::from_center(center.pose.rotation,
                                c + to_world * Vec3(r * std::cos(a), r * std::sin(a), 0.0));
    v.id = i + 1;
    poses.push_back(v);
  }
  return poses;
}

std::vector<EvalTarget> warp_eval_targets(const CameraViewd& reference, const RgbImage& image,
                                          const DepthMap& depth, std::span<const CameraViewd> poses) {
  std::vector<EvalTarget> out;
  out.reserve(poses.size());
  for (const CameraViewd& v : poses) {
    WarpResult w = forward_warp(image, depth, reference, v);
    out.push_back({v, std::move(w.image), !w.missing.missing});
  }
  return out;
}

}  // namespace scenefield
