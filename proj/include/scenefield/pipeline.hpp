#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scenefield/config.hpp"
#include "scenefield/dibr.hpp"
#include "scenefield/providers.hpp"
#include "scenefield/training.hpp"

namespace scenefield {

/// A view whose content is fixed: its image and the depth that anchors later masks.
struct UpdatedView {
  CameraViewd view;
  RgbImage image;
  DepthMap depth;
};

struct PipelineState {
  std::vector<CameraViewd> trajectory; // indexed by view id
  std::vector<UpdatedView> updated;    // in update order; updated[0] is view 0
  std::vector<int> pending;            // view ids still to visit, in visit order
  RadianceGrid grid;
  std::string checkpoint_hash;
  RgbImage initial_image; // reference for candidate selection
  DepthMap initial_depth;

  [[nodiscard]] bool is_updated(int id) const;
};

/// Center target plus DIBR-warped satellites around it.
struct SupportSet {
  TrainTarget center;
  std::vector<TrainTarget> satellites;

  [[nodiscard]] std::vector<TrainTarget> targets() const;
};

/// Satellites at `count` poses on a circle of radius `shift`; each is supervised where a valid
/// source pixel landed. count = 0 gives the center alone.
[[nodiscard]] SupportSet build_support_set(const CameraViewd& view, const RgbImage& image,
                                           const DepthMap& depth, int count, double shift,
                                           const WarpOptions& options = {});

enum class UpdateBranch {
  initialize, // view 0
  covered,    // nothing missing: accepted with its render, no training
  grid_fill,  // mask below the inpainting threshold: render kept, depth re-aligned, grid trained
  inpaint,    // full update
};
[[nodiscard]] const char* to_string(UpdateBranch branch);

/// Everything one step produced, for logging and artifact export.
struct ViewRecord {
  int view = 0;
  UpdateBranch branch = UpdateBranch::initialize;
  std::optional<RenderedView> rendered;
  std::optional<RegionMask> mask;
  std::optional<RgbImage> inpaint_input;
  std::optional<RgbImage> image; // image the update trained on
  std::optional<std::size_t> selected_candidate;
  std::optional<DepthMap> estimated;
  std::optional<AlignmentResult> alignment;
  DepthMap depth; // depth stored for the view
  std::size_t sanitized_depth = 0;
  std::vector<LossTerms> losses;
};

class PipelineObserver {
 public:
  virtual ~PipelineObserver() = default;
  virtual void on_fit_log(int /*view*/, int /*iteration*/, const LossTerms&) {}
  /// Called once a view is complete and the state has advanced past it.
  virtual void on_view_done(const PipelineState&, const ViewRecord&) {}
};

/// Scene initialization and the view-by-view inpainting and updating loop.
class Pipeline {
 public:
  Pipeline(RunConfig config, SceneProvider& provider, PipelineObserver* observer = nullptr);

  [[nodiscard]] const RunConfig& config() const { return config_; }

  /// Generates view 0, estimates its depth, fits the grid on its support set.
  [[nodiscard]] PipelineState initialize();
  /// Processes view `id`, which must be pending.
  void update_view(PipelineState& state, int id);
  /// Processes every pending view in order.
  void run_pending(PipelineState& state);
  /// initialize() followed by run_pending().
  [[nodiscard]] PipelineState run();

  /// Mean PSNR of the grid against view 0 warped to random test poses near view 0.
  [[nodiscard]] EvalReport evaluate_initialization(const PipelineState& state) const;

  [[nodiscard]] FitOptions fit_options(int iterations, int view) const;
  [[nodiscard]] RadianceGrid make_grid() const;

 private:
  RunConfig config_;
  SceneProvider& provider_;
  PipelineObserver* observer_;
};

/// Trajectory views and their visiting order (view ids, view 0 first).
[[nodiscard]] std::vector<CameraViewd> trajectory_views(const RunConfig& config);
[[nodiscard]] std::vector<int> visit_order(const std::vector<CameraViewd>& views);

/// Pixels of `view` that no updated view splats into.
[[nodiscard]] RegionMask missing_for(const PipelineState& state, const CameraViewd& view,
                                     const WarpOptions& options = {});

}  // namespace scenefield
