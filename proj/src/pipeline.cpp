#include "scenefield/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include "scenefield/checkpoint.hpp"
#include "scenefield/image_io.hpp"
#include "scenefield/seeding.hpp"
#include "scenefield/trajectory.hpp"

namespace scenefield {

bool PipelineState::is_updated(int id) const {
  return std::any_of(updated.begin(), updated.end(), [id](const UpdatedView& u) { return u.view.id == id; });
}

std::vector<TrainTarget> SupportSet::targets() const {
  std::vector<TrainTarget> out;
  out.reserve(satellites.size() + 1);
  out.push_back(center);
  out.insert(out.end(), satellites.begin(), satellites.end());
  return out;
}

SupportSet build_support_set(const CameraViewd& view, const RgbImage& image, const DepthMap& depth,
                             int count, double shift, const WarpOptions& options) {
  if (count < 0) throw std::invalid_argument("build_support_set: negative satellite count");
  SupportSet set;
  set.center = {view, image, depth, depth.valid};
  if (count == 0) return set;
  for (const CameraViewd& pose : support_poses(view, shift, count)) {
    WarpResult w = forward_warp(image, depth, view, pose, options);
    BoolArray mask = w.depth.valid && !w.missing.missing;
    set.satellites.push_back({pose, std::move(w.image), std::move(w.depth), std::move(mask)});
  }
  return set;
}

const char* to_string(UpdateBranch branch) {
  switch (branch) {
    case UpdateBranch::initialize: return "initialize";
    case UpdateBranch::covered: return "covered";
    case UpdateBranch::grid_fill: return "grid_fill";
    case UpdateBranch::inpaint: return "inpaint";
  }
  return "unknown";
}

std::vector<CameraViewd> trajectory_views(const RunConfig& config) {
  return build_trajectory(config.trajectory, config.origin_view());
}

std::vector<int> visit_order(const std::vector<CameraViewd>& views) {
  std::vector<int> order;
  for (std::size_t i : nearest_first_order(views)) order.push_back(views[i].id);
  return order;
}

RegionMask missing_for(const PipelineState& state, const CameraViewd& view, const WarpOptions& options) {
  std::vector<KnownView> known;
  known.reserve(state.updated.size());
  for (const UpdatedView& u : state.updated) known.push_back({u.view, u.depth});
  return missing_mask(view, known, options);
}

Pipeline::Pipeline(RunConfig config, SceneProvider& provider, PipelineObserver* observer)
    : config_(std::move(config)), provider_(provider), observer_(observer) {
  validate(config_);
}

FitOptions Pipeline::fit_options(int iterations, int view) const {
  FitOptions o;
  o.iterations = iterations;
  o.batch_rays = config_.batch_rays;
  o.render = {config_.steps, config_.transmittance_form};
  o.weights = config_.weights;
  o.adam.lr_initial = config_.lr_initial;
  o.adam.lr_final = config_.lr_final;
  o.seed = derive_seed(config_.seed, "rays", std::uint64_t(view));
  if (observer_) {
    o.on_log = [this, view](int it, const LossTerms& t) { observer_->on_fit_log(view, it, t); };
  }
  return o;
}

RadianceGrid Pipeline::make_grid() const {
  return RadianceGrid(config_.bbox, config_.grid_resolution, config_.grid);
}

PipelineState Pipeline::initialize() {
  PipelineState state;
  state.trajectory = trajectory_views(config_);
  const CameraViewd& view0 = state.trajectory.front();

  ViewRecord rec;
  rec.view = 0;
  rec.branch = UpdateBranch::initialize;
  const RgbImage image = quantize8(
      provider_.generate_initial(config_.prompt, view0, derive_seed(config_.seed, "provider", 0)));
  const DepthMap depth = round_to_float(provider_.estimate_depth(image, view0, &rec.sanitized_depth));
  const WarpOptions warp{config_.dilate};
  const SupportSet support = build_support_set(view0, image, depth, config_.support_count,
                                               config_.support_shift, warp);

  state.grid = make_grid();
  const auto targets = support.targets();
  rec.losses = fit(state.grid, targets, fit_options(config_.initial_iterations, 0)).history;

  state.initial_image = image;
  state.initial_depth = depth;
  state.updated.push_back({view0, image, depth});
  for (int id : visit_order(state.trajectory)) {
    if (id != 0) state.pending.push_back(id);
  }
  state.checkpoint_hash = checkpoint_hash(state.grid);
  rec.image = image;
  rec.estimated = depth;
  rec.depth = depth;
  if (observer_) observer_->on_view_done(state, rec);
  return state;
}

void Pipeline::update_view(PipelineState& state, int id) {
  const auto it = std::find(state.pending.begin(), state.pending.end(), id);
  if (it == state.pending.end()) throw std::invalid_argument("update_view: view is not pending");
  const CameraViewd view = state.trajectory.at(std::size_t(id));
  const WarpOptions warp{config_.dilate};

  ViewRecord rec;
  rec.view = id;
  RenderedView rendered = render_view(state.grid, view, config_.steps, config_.opacity_floor);
  RegionMask mask = missing_for(state, view, warp);

  auto finish = [&](RgbImage image, DepthMap depth) {
    state.updated.push_back({view, std::move(image), depth});
    state.pending.erase(std::find(state.pending.begin(), state.pending.end(), id));
    state.checkpoint_hash = checkpoint_hash(state.grid);
    rec.depth = std::move(depth);
    rec.mask = std::move(mask);
    rec.rendered = std::move(rendered);
    if (observer_) observer_->on_view_done(state, rec);
  };

  if (mask.empty()) {
    rec.branch = UpdateBranch::covered;
    finish(quantize8(rendered.image), round_to_float(rendered.depth));
    return;
  }

  RgbImage image;
  const double fraction = double(mask.count()) / double(mask.size());
  if (fraction < config_.min_mask_fraction) {
    rec.branch = UpdateBranch::grid_fill;
    image = quantize8(rendered.image);
  } else {
    rec.branch = UpdateBranch::inpaint;
    InpaintRequest req{config_.prompt, quantize8(rendered.image), mask, config_.candidates,
                       derive_seed(config_.seed, "provider", std::uint64_t(id))};
    const CandidateSet set = provider_.inpaint(req, view);
    const Selection sel = select_candidate(set, state.initial_image, provider_);
    rec.inpaint_input = req.image;
    rec.selected_candidate = sel.index;
    image = quantize8(sel.image);
  }
  rec.image = image;

  DepthMap estimated = provider_.estimate_depth(image, view, &rec.sanitized_depth);
  const BoolArray overlap = rendered.depth.valid && estimated.valid && !mask.missing;
  AlignOptions align;
  align.max_pairs = config_.max_pairs;
  align.local = config_.local;
  AlignmentResult alignment = align_depth(rendered.depth, estimated, overlap, view.intrinsics,
                                          derive_seed(config_.seed, "pairs", std::uint64_t(id)), align);
  DepthMap depth = round_to_float(alignment.aligned);
  rec.estimated = std::move(estimated);
  rec.alignment = std::move(alignment);

  const SupportSet support = build_support_set(view, image, depth, config_.support_count,
                                               config_.support_shift, warp);
  const auto targets = support.targets();
  rec.losses = fit(state.grid, targets, fit_options(config_.update_iterations, id)).history;
  finish(std::move(image), std::move(depth));
}

void Pipeline::run_pending(PipelineState& state) {
  while (!state.pending.empty()) update_view(state, state.pending.front());
}

PipelineState Pipeline::run() {
  PipelineState state = initialize();
  run_pending(state);
  return state;
}

EvalReport Pipeline::evaluate_initialization(const PipelineState& state) const {
  const CameraViewd& view0 = state.trajectory.front();
  const auto poses = sample_test_poses(view0, config_.eval_poses, config_.eval_min_shift,
                                       config_.eval_max_shift, derive_seed(config_.seed, "eval"));
  const auto targets = warp_eval_targets(view0, state.initial_image, state.initial_depth, poses);
  return eval_initialization(state.grid, targets, config_.steps);
}

}  // namespace scenefield
