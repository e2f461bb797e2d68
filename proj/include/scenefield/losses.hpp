#pragma once

#include <span>
#include <vector>

#include "scenefield/types.hpp"
#include "scenefield/volume_render.hpp"

namespace scenefield {

/// Which free-space penalty the transmittance term uses.
enum class TransmittanceForm {
  /// mean_i ((1 - T_i) m_i)^2 over samples in front of the target depth: zero when the space in
  /// front of the surface is empty.
  complement,
  /// RMS of T_i m_i over the same samples (the norm of T * m taken literally).
  literal,
};

struct LossWeights {
  double rgb = 1.0;
  double depth = 0.005;
  double transmittance = 1000.0;
};

struct ColorLoss {
  double value = 0.0;
  ColorMatrix d_color; // d value / d rendered color, zero outside the mask
};

struct DepthLoss {
  double value = 0.0;
  Eigen::VectorXd d_depth;
};

struct TransmittanceLoss {
  double value = 0.0;
  std::vector<std::vector<double>> d_transmittance; // per pixel, per sample
};

/// Mean squared error over masked pixels and the three channels.
[[nodiscard]] ColorLoss loss_rgb(const ColorMatrix& rendered, const ColorMatrix& target,
                                 const BoolArray& mask);

/// Mean squared z-depth error over masked pixels. `target` must be valid where `mask` is set.
[[nodiscard]] DepthLoss loss_depth(const Eigen::VectorXd& rendered, const DepthMap& target,
                                   const BoolArray& mask);

/// Free-space penalty of one ray. `target_distance` is the expected surface as ray distance;
/// samples with t < target_distance are penalized. Writes d penalty / d T_i into `d_trans` when it
/// is non-empty (must then match the trace length). Rays with no sample in front of the surface
/// contribute zero.
double transmittance_penalty(std::span<const double> t, std::span<const double> transmittance,
                             double target_distance, TransmittanceForm form,
                             std::span<double> d_trans = {});

/// Mean over masked pixels of the per-ray penalty; the target z-depth is converted to ray distance
/// with each pixel's `z_scales` entry.
[[nodiscard]] TransmittanceLoss loss_transmittance(const std::vector<SampleTrace>& traces,
                                                   const DepthMap& target, const BoolArray& mask,
                                                   const Eigen::VectorXd& z_scales,
                                                   TransmittanceForm form = TransmittanceForm::complement);

}  // namespace scenefield
