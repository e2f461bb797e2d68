#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "scenefield/camera.hpp"
#include "scenefield/losses.hpp"
#include "scenefield/radiance_grid.hpp"
#include "scenefield/volume_render.hpp"

namespace scenefield {

/// One supervised view: color and depth targets plus the pixels that carry supervision.
struct TrainTarget {
  CameraViewd view;
  RgbImage image;
  DepthMap depth;
  BoolArray mask;
};

struct SupervisedRay {
  Rayd ray;
  Vec3 color = Vec3::Zero();
  double target_z = 0.0;
};

struct LossTerms {
  double rgb = 0.0;
  double depth = 0.0;
  double transmittance = 0.0;
  double total = 0.0;
};

struct RenderSettings {
  int steps = 192;
  TransmittanceForm form = TransmittanceForm::complement;
};

/// Weighted objective over a ray minibatch. When `gradient` is given, adds d(total)/d(raw params).
/// Each term is a mean over the batch, matching loss_rgb / loss_depth / loss_transmittance on the
/// same pixels.
LossTerms total_loss(const RadianceGrid& grid, std::span<const SupervisedRay> batch,
                     const LossWeights& weights, const RenderSettings& settings,
                     GridGradient* gradient = nullptr);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double lr_initial = 0.02;
  double lr_final = 0.002;
};

/// Adaptive-moment optimizer over grid nodes. Only nodes present in the gradient are stepped, so
/// an iteration costs time proportional to the nodes the minibatch touched.
class LazyAdam {
 public:
  LazyAdam(Eigen::Index nodes, const AdamOptions& options);

  /// One update with learning rate decayed exponentially from lr_initial to lr_final over
  /// `total_iterations`.
  void step(RadianceGrid& grid, const GridGradient& gradient, int iteration, int total_iterations);

  [[nodiscard]] std::int64_t steps() const { return step_; }

 private:
  AdamOptions options_;
  NodeMatrix first_;
  NodeMatrix second_;
  std::int64_t step_ = 0;
};

struct FitOptions {
  int iterations = 1500;
  int batch_rays = 4096;
  RenderSettings render;
  LossWeights weights;
  AdamOptions adam;
  std::uint64_t seed = 0;
  int log_every = 50;
  std::function<void(int iteration, const LossTerms&)> on_log;
};

struct FitResult {
  std::vector<LossTerms> history; // one entry per iteration
};

/// Minibatch gradient descent on all supervised pixels of `targets`. Deterministic for a fixed
/// seed. Throws NumericError on a non-finite loss.
FitResult fit(RadianceGrid& grid, std::span<const TrainTarget> targets, const FitOptions& options);

/// Rays and targets for every supervised pixel.
[[nodiscard]] std::vector<SupervisedRay> supervised_rays(const TrainTarget& target);

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over masked pixels (unit-range colors); kPsnrCap when the MSE is zero and
/// nullopt when the mask is empty.
[[nodiscard]] std::optional<double> psnr(const ColorMatrix& rendered, const ColorMatrix& target,
                                         const BoolArray& mask);

struct EvalTarget {
  CameraViewd view;
  RgbImage image;
  BoolArray mask; // valid pixels
};

struct EvalReport {
  double mean_psnr = 0.0;
  std::vector<std::optional<double>> per_view;
};

/// Mean PSNR of grid renders against the targets; targets with no valid pixel are left out of the
/// mean.
[[nodiscard]] EvalReport eval_initialization(const RadianceGrid& grid,
                                             std::span<const EvalTarget> targets, int steps);

/// Test cameras shifted from `center` by a random distance in [min_shift, max_shift] along a
/// random direction in the camera's x-y plane.
[[nodiscard]] std::vector<CameraViewd> sample_test_poses(const CameraViewd& center, int count,
                                                         double min_shift, double max_shift,
                                                         std::uint64_t seed);

/// Forward-warps the reference view into each pose; valid pixels are the splatted ones.
[[nodiscard]] std::vector<EvalTarget> warp_eval_targets(const CameraViewd& reference,
                                                        const RgbImage& image, const DepthMap& depth,
                                                        std::span<const CameraViewd> poses);

}  // namespace scenefield
