#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "scenefield/camera.hpp"
#include "scenefield/types.hpp"

namespace scenefield {

/// Alignment cannot proceed (no overlap, or every scale ratio degenerate).
class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Back-projections of one pixel through the rendered and the estimated depth (camera frame).
struct PointPair {
  Vec3 rendered;
  Vec3 estimated;
  Eigen::Index pixel = 0;
};

struct GlobalAlignment {
  double scale = 1.0;
  double offset = 0.0;
};

inline constexpr std::size_t kMaxAlignmentPairs = 10000;

/// Up to `max_pairs` distinct pixels drawn uniformly from the overlap (restricted to pixels valid
/// in both maps), returned in draw order. Throws AlignmentError when the overlap is empty.
[[nodiscard]] std::vector<PointPair> sample_pairs(const DepthMap& rendered, const DepthMap& estimated,
                                                  const BoolArray& overlap,
                                                  const Intrinsicsd& intrinsics,
                                                  std::size_t max_pairs, std::uint64_t seed);

/// Scale is the mean ratio of rendered to estimated distance between consecutive pairs (ratios
/// whose estimated distance is below 1e-9 are skipped); offset is the mean z gap after scaling.
[[nodiscard]] GlobalAlignment global_align(const std::vector<PointPair>& pairs);

/// s * D + offset on valid pixels. Pixels whose result is not positive become invalid.
[[nodiscard]] DepthMap apply_global(const DepthMap& depth, const GlobalAlignment& alignment);

/// Lattice of per-node (scale, offset) pairs spread evenly over the image and bilinearly
/// interpolated at pixel centers.
class CorrectionField {
 public:
  CorrectionField() = default;
  CorrectionField(int width, int height, int lattice);

  [[nodiscard]] int lattice() const { return lattice_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] Eigen::Index node_count() const { return Eigen::Index(lattice_) * lattice_; }

  /// Node values ordered row-major over the lattice.
  [[nodiscard]] Eigen::VectorXd& scales() { return scales_; }
  [[nodiscard]] const Eigen::VectorXd& scales() const { return scales_; }
  [[nodiscard]] Eigen::VectorXd& offsets() { return offsets_; }
  [[nodiscard]] const Eigen::VectorXd& offsets() const { return offsets_; }

  struct Stencil {
    std::array<Eigen::Index, 4> nodes;
    std::array<double, 4> weights;
  };
  [[nodiscard]] Stencil stencil(int x, int y) const;

  [[nodiscard]] std::pair<double, double> at(int x, int y) const;
  /// Applies the correction to valid pixels; non-positive results become invalid.
  [[nodiscard]] DepthMap apply(const DepthMap& depth) const;
  [[nodiscard]] bool is_identity() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int lattice_ = 0;
  Eigen::VectorXd scales_;
  Eigen::VectorXd offsets_;
};

struct LocalOptions {
  int lattice = 17;
  double smoothness = 0.1; // weight of squared differences between neighboring nodes
};

struct LocalAlignment {
  DepthMap depth;
  CorrectionField field;
  double rmse_before = 0.0; // overlap RMSE of the input
  double rmse_after = 0.0;
};

/// Fits the correction field by linear least squares: mean squared overlap residual plus the
/// smoothness penalty. Falls back to the identity field when the fit does not lower the overlap
/// residual, and raises the smoothness when a node scale comes out non-positive.
[[nodiscard]] LocalAlignment local_align(const DepthMap& global, const DepthMap& rendered,
                                         const BoolArray& overlap, const LocalOptions& options = {});

/// RMSE over pixels set in `overlap` and valid in both maps (0 when there are none).
[[nodiscard]] double overlap_rmse(const DepthMap& a, const DepthMap& b, const BoolArray& overlap);

struct AlignOptions {
  std::size_t max_pairs = kMaxAlignmentPairs;
  LocalOptions local;
  bool enable_local = true;
};

struct AlignmentResult {
  GlobalAlignment global;
  DepthMap global_depth;
  DepthMap aligned;
  CorrectionField field;
  bool fallback = false; // no usable overlap: identity alignment, local stage skipped
  std::size_t pairs = 0;
  double rmse_raw = 0.0;
  double rmse_global = 0.0;
  double rmse_local = 0.0;
};

/// Global then local alignment of `estimated` onto `rendered` over `overlap`.
[[nodiscard]] AlignmentResult align_depth(const DepthMap& rendered, const DepthMap& estimated,
                                          const BoolArray& overlap, const Intrinsicsd& intrinsics,
                                          std::uint64_t seed, const AlignOptions& options = {});

/// (D + tau1) * D^(1 / tau2) on valid pixels.
[[nodiscard]] DepthMap distort_depth(const DepthMap& depth, double tau1, double tau2);

struct Distortion {
  double tau1 = 0.0;
  double tau2 = 40.0;
};
/// tau1 in [0, 1] and tau2 in [30, 50], drawn from `seed`.
[[nodiscard]] Distortion sample_distortion(std::uint64_t seed);

}  // namespace scenefield
