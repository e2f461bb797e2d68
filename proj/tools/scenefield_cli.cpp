// scenefield: command-line front end.
//
//   scenefield generate --config run.json [--resume]
//   scenefield render   --ckpt grid.ckpt --traj orbit:steps=8 --out frames/
//   scenefield eval     --ckpt grid.ckpt --oracle run.json [--sweep-support 0,2,4,8,12]
//                       [--sweep-shift 0.1,0.2,0.3,0.4] [--report report.json]
//   scenefield align    --rendered r.pfm --estimated e.pfm --mask overlap.png [--out a.pfm]
//
// Exit codes: 0 ok, 2 usage, 3 provider failure, 4 numeric abort, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "scenefield/checkpoint.hpp"
#include "scenefield/config.hpp"
#include "scenefield/depth_alignment.hpp"
#include "scenefield/image_io.hpp"
#include "scenefield/pipeline.hpp"
#include "scenefield/run_directory.hpp"
#include "scenefield/seeding.hpp"
#include "scenefield/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scenefield;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kProviderFailure = 3;
constexpr int kNumericAbort = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void fail(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

std::string frame_name(const char* stem, std::size_t i, const char* ext) {
  std::ostringstream os;
  os << stem << '_' << std::setw(4) << std::setfill('0') << i << ext;
  return os.str();
}

int cmd_generate(const std::string& config, bool resume) {
  if (!fs::exists(config)) throw UsageError("config file not found: " + config);
  GenerateResult r = generate_run(config, resume);
  std::cout << json{{"run_dir", r.run_dir.string()},
                    {"views", r.state.updated.size()},
                    {"hash", r.state.checkpoint_hash}}
                   .dump()
            << "\n";
  return kOk;
}

int cmd_render(const std::string& ckpt, const std::string& traj, const std::string& out, int width,
               int height, double hfov) {
  const RadianceGrid grid = load_checkpoint(ckpt);
  TrajectorySpec spec;
  try {
    spec = parse_trajectory(traj);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const CameraViewd origin{Intrinsicsd::from_fov(width, height, hfov), Posed{}, 0};
  if (!origin.intrinsics.is_valid()) throw UsageError("invalid render resolution or field of view");
  const auto views = build_trajectory(spec, origin);
  fs::create_directories(out);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const RenderedView r = render_view(grid, views[i], 192);
    write_png(fs::path(out) / frame_name("frame", i, ".png"), r.image);
    write_pfm(fs::path(out) / frame_name("depth", i, ".pfm"), r.depth);
  }
  std::cout << json{{"frames", views.size()}, {"out", out}}.dump() << "\n";
  return kOk;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad number in list: '" + item + "'");
    }
  }
  return out;
}

int cmd_eval(const std::string& ckpt, const std::string& oracle_config, const std::string& sweep_support,
             const std::string& sweep_shift, const std::string& report_path) {
  RunConfig config = load_config(oracle_config);
  if (config.provider != ProviderMode::oracle) {
    throw UsageError("eval needs an oracle config: a remote provider has no ground truth");
  }
  if (config.eval_poses < 1) throw UsageError("eval needs at least one test pose");
  RadianceGrid grid = load_checkpoint(ckpt);

  auto evaluate = [](const RunConfig& c, RadianceGrid* fixed) {
    auto provider = make_provider(c);
    Pipeline pipeline(c, *provider);
    PipelineState state;
    if (fixed) {
      // Ground-truth view 0 without training; the given grid is scored.
      state.trajectory = trajectory_views(c);
      const CameraViewd& v0 = state.trajectory.front();
      state.initial_image = quantize8(provider->generate_initial(c.prompt, v0, derive_seed(c.seed, "provider", 0)));
      state.initial_depth = round_to_float(provider->estimate_depth(state.initial_image, v0));
      state.grid = *fixed;
    } else {
      state = pipeline.initialize();
    }
    return pipeline.evaluate_initialization(state);
  };

  json report;
  const EvalReport base = evaluate(config, &grid);
  report["checkpoint_hash"] = checkpoint_hash(grid);
  report["mean_psnr"] = base.mean_psnr;
  json per_view = json::array();
  for (std::size_t i = 0; i < base.per_view.size(); ++i) {
    per_view.push_back({{"pose", i + 1}, {"psnr", base.per_view[i] ? json(*base.per_view[i]) : json(nullptr)}});
  }
  report["per_view"] = per_view;

  if (!sweep_support.empty()) {
    json rows = json::array();
    for (double count : parse_list(sweep_support)) {
      RunConfig c = config;
      c.support_count = int(count);
      rows.push_back({{"support_count", c.support_count}, {"mean_psnr", evaluate(c, nullptr).mean_psnr}});
    }
    report["support_sweep"] = rows;
  }
  if (!sweep_shift.empty()) {
    json rows = json::array();
    for (double shift : parse_list(sweep_shift)) {
      RunConfig c = config;
      c.support_shift = shift;
      rows.push_back({{"support_shift", shift}, {"mean_psnr", evaluate(c, nullptr).mean_psnr}});
    }
    report["shift_sweep"] = rows;
  }
  const std::string text = report.dump(2) + "\n";
  if (!report_path.empty()) atomic_write(report_path, text);
  std::cout << text;
  return kOk;
}

int cmd_align(const std::string& rendered_path, const std::string& estimated_path,
              const std::string& mask_path, const std::string& out, double hfov, std::uint64_t seed) {
  const DepthMap rendered = read_pfm(rendered_path);
  const DepthMap estimated = read_pfm(estimated_path);
  int w = 0;
  int h = 0;
  const BoolArray overlap = read_mask_png(mask_path, &w, &h);
  if (!rendered.same_shape(w, h) || !estimated.same_shape(w, h)) {
    throw UsageError("depth maps and mask must share one resolution");
  }
  const AlignmentResult a =
      align_depth(rendered, estimated, overlap, Intrinsicsd::from_fov(w, h, hfov), seed);
  if (!out.empty()) write_pfm(out, a.aligned);
  std::cout << json{{"scale", a.global.scale},
                    {"offset", a.global.offset},
                    {"fallback", a.fallback},
                    {"pairs", a.pairs},
                    {"rmse_raw", a.rmse_raw},
                    {"rmse_global", a.rmse_global},
                    {"rmse_local", a.rmse_local}}
                   .dump()
            << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenefield: text-driven scene synthesis with a voxel radiance field"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "run or resume the generation pipeline");
  std::string config;
  bool resume = false;
  gen->add_option("--config", config, "run config (JSON)")->required();
  gen->add_flag("--resume", resume, "continue the run stored in the config's output_dir");

  auto* render = app.add_subcommand("render", "render a checkpoint along a trajectory");
  std::string ckpt;
  std::string traj;
  std::string out;
  int width = 128;
  int height = 128;
  double hfov = 90.0;
  render->add_option("--ckpt", ckpt, "grid checkpoint")->required();
  render->add_option("--traj", traj, "trajectory, e.g. orbit:steps=8,yaw_step=45")->required();
  render->add_option("--out", out, "output directory")->required();
  render->add_option("--width", width, "image width");
  render->add_option("--height", height, "image height");
  render->add_option("--hfov", hfov, "horizontal field of view in degrees");

  auto* eval = app.add_subcommand("eval", "score a checkpoint against the oracle scene");
  std::string oracle;
  std::string sweep_support;
  std::string sweep_shift;
  std::string report;
  eval->add_option("--ckpt", ckpt, "grid checkpoint")->required();
  eval->add_option("--oracle", oracle, "oracle run config (JSON)")->required();
  eval->add_option("--sweep-support", sweep_support, "comma-separated satellite counts to re-initialize with");
  eval->add_option("--sweep-shift", sweep_shift, "comma-separated satellite shifts to re-initialize with");
  eval->add_option("--report", report, "also write the report here");

  auto* align = app.add_subcommand("align", "align an estimated depth map to a rendered one");
  std::string rendered;
  std::string estimated;
  std::string mask;
  std::uint64_t seed = 0;
  align->add_option("--rendered", rendered, "rendered depth (PFM)")->required();
  align->add_option("--estimated", estimated, "estimated depth (PFM)")->required();
  align->add_option("--mask", mask, "overlap mask (PNG, white = overlap)")->required();
  align->add_option("--out", out, "write the aligned depth here (PFM)");
  align->add_option("--hfov", hfov, "horizontal field of view in degrees");
  align->add_option("--seed", seed, "pair sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(config, resume);
    if (*render) return cmd_render(ckpt, traj, out, width, height, hfov);
    if (*eval) return cmd_eval(ckpt, oracle, sweep_support, sweep_shift, report);
    if (*align) return cmd_align(rendered, estimated, mask, out, hfov, seed);
  } catch (const UsageError& e) {
    fail("usage", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    fail("config", e.what());
    return kUsage;
  } catch (const ProviderError& e) {
    fail("provider", e.what());
    return kProviderFailure;
  } catch (const NumericError& e) {
    fail("numeric", e.what());
    return kNumericAbort;
  } catch (const CheckpointError& e) {
    fail("checkpoint", e.what());
    return 1;
  } catch (const std::exception& e) {
    fail("error", e.what());
    return 1;
  }
  return kUsage;
}
