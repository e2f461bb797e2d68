#include "scenefield/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenefield {

ColorLoss loss_rgb(const ColorMatrix& rendered, const ColorMatrix& target, const BoolArray& mask) {
  if (rendered.rows() != target.rows() || rendered.rows() != mask.size()) {
    throw std::invalid_argument("loss_rgb: shape mismatch");
  }
  ColorLoss out{0.0, ColorMatrix::Zero(rendered.rows(), 3)};
  const Eigen::Index count = mask.count();
  if (count == 0) return out;
  const double norm = 1.0 / (3.0 * double(count));
  for (Eigen::Index p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    const Eigen::RowVector3d diff = rendered.row(p) - target.row(p);
    out.value += diff.squaredNorm();
    out.d_color.row(p) = 2.0 * norm * diff;
  }
  out.value *= norm;
  return out;
}

DepthLoss loss_depth(const Eigen::VectorXd& rendered, const DepthMap& target, const BoolArray& mask) {
  if (rendered.size() != target.size() || rendered.size() != mask.size()) {
    throw std::invalid_argument("loss_depth: shape mismatch");
  }
  DepthLoss out{0.0, Eigen::VectorXd::Zero(rendered.size())};
  const Eigen::Index count = mask.count();
  if (count == 0) return out;
  const double norm = 1.0 / double(count);
  for (Eigen::Index p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    if (!target.valid[p]) throw std::invalid_argument("loss_depth: supervised pixel has no target depth");
    const double diff = rendered[p] - target.values[p];
    out.value += diff * diff;
    out.d_depth[p] = 2.0 * norm * diff;
  }
  out.value *= norm;
  return out;
}

double transmittance_penalty(std::span<const double> t, std::span<const double> transmittance,
                             double target_distance, TransmittanceForm form,
                             std::span<double> d_trans) {
  if (t.size() != transmittance.size() || (!d_trans.empty() && d_trans.size() != t.size())) {
    throw std::invalid_argument("transmittance_penalty: trace length mismatch");
  }
  std::fill(d_trans.begin(), d_trans.end(), 0.0);
  std::size_t front = 0;
  while (front < t.size() && t[front] < target_distance) ++front;
  if (front == 0) return 0.0;
  const double inv = 1.0 / double(front);

  double sum = 0.0;
  if (form == TransmittanceForm::complement) {
    for (std::size_t i = 0; i < front; ++i) {
      const double gap = 1.0 - transmittance[i];
      sum += gap * gap;
      if (!d_trans.empty()) d_trans[i] = -2.0 * gap * inv;
    }
    return sum * inv;
  }
  for (std::size_t i = 0; i < front; ++i) sum += transmittance[i] * transmittance[i];
  const double rms = std::sqrt(sum * inv);
  if (!d_trans.empty() && rms > 0.0) {
    for (std::size_t i = 0; i < front; ++i) d_trans[i] = transmittance[i] * inv / rms;
  }
  return rms;
}

TransmittanceLoss loss_transmittance(const std::vector<SampleTrace>& traces, const DepthMap& target,
                                     const BoolArray& mask, const Eigen::VectorXd& z_scales,
                                     TransmittanceForm form) {
  if (Eigen::Index(traces.size()) != mask.size() || target.size() != mask.size() ||
      z_scales.size() != mask.size()) {
    throw std::invalid_argument("loss_transmittance: shape mismatch");
  }
  TransmittanceLoss out;
  out.d_transmittance.resize(traces.size());
  const Eigen::Index count = mask.count();
  if (count == 0) return out;
  const double norm = 1.0 / double(count);
  for (Eigen::Index p = 0; p < mask.size(); ++p) {
    auto& grad = out.d_transmittance[std::size_t(p)];
    grad.assign(traces[std::size_t(p)].t.size(), 0.0);
    if (!mask[p]) continue;
    if (!target.valid[p]) {
      throw std::invalid_argument("loss_transmittance: supervised pixel has no target depth");
    }
    const auto& tr = traces[std::size_t(p)];
    out.value += norm * transmittance_penalty(tr.t, tr.transmittance,
                                              std::min(target.values[p] / z_scales[p], tr.surface_limit),
                                              form, grad);
    for (double& g : grad) g *= norm;
  }
  return out;
}

}  // namespace scenefield
