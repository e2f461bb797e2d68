#include "scenefield/run_directory.hpp"

#include <json.hpp>

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "scenefield/checkpoint.hpp"
#include "scenefield/image_io.hpp"
#include "scenefield/oracle_scene.hpp"
#include "scenefield/remote_provider.hpp"
#include "scenefield/seeding.hpp"

namespace scenefield {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string view_dir(int id) {
  std::ostringstream os;
  os << "views/" << std::setw(3) << std::setfill('0') << id;
  return os.str();
}

std::string checkpoint_name(int id) {
  std::ostringstream os;
  os << "checkpoints/view_" << std::setw(3) << std::setfill('0') << id << ".ckpt";
  return os.str();
}

std::vector<json> read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<json> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      events.push_back(json::parse(line));
    } catch (const json::exception&) {
      // A torn final line from an interrupted write is ignored.
      break;
    }
  }
  return events;
}

}  // namespace

std::unique_ptr<SceneProvider> make_provider(const RunConfig& config) {
  if (config.provider == ProviderMode::remote) {
    RemoteOptions o;
    o.url = resolve_provider_url(config.provider_url);
    o.timeout_s = config.provider_timeout_s;
    return std::make_unique<RemoteProvider>(o);
  }
  OracleOptions o = config.oracle;
  o.seed = derive_seed(config.seed, "provider");
  return std::make_unique<OracleProvider>(OracleScene(config.oracle_scene), o);
}

RunDirectory::RunDirectory(fs::path root) : root_(std::move(root)) {
  log_.open(root_ / "log.jsonl", std::ios::app);
  if (!log_) throw IoError("cannot open " + (root_ / "log.jsonl").string());
}

RunDirectory RunDirectory::create(const fs::path& root, const std::string& config_text) {
  if (fs::exists(root / "log.jsonl")) {
    throw IoError("run directory " + root.string() + " already holds a run (use --resume)");
  }
  fs::create_directories(root / "views");
  fs::create_directories(root / "checkpoints");
  atomic_write(root / "config.json", config_text);
  return RunDirectory(root);
}

RunDirectory RunDirectory::open(const fs::path& root) {
  if (!fs::exists(root / "log.jsonl") || !fs::exists(root / "config.json")) {
    throw IoError("no run to resume in " + root.string());
  }
  return RunDirectory(root);
}

std::string RunDirectory::config_text() const {
  const Bytes b = read_file(root_ / "config.json");
  return std::string(b.begin(), b.end());
}

void RunDirectory::append(const std::string& line) {
  log_ << line << '\n';
  log_.flush();
}

void RunDirectory::log_start(const RunConfig& config) {
  append(json{{"event", "start"},
              {"trajectory", to_string(config.trajectory)},
              {"seed", config.seed},
              {"weights",
               {{"rgb", config.weights.rgb},
                {"depth", config.weights.depth},
                {"transmittance", config.weights.transmittance}}},
              {"support", {{"count", config.support_count}, {"shift", config.support_shift}}}}
             .dump());
}

void RunDirectory::on_fit_log(int view, int iteration, const LossTerms& t) {
  append(json{{"event", "fit"},
              {"view", view},
              {"iteration", iteration},
              {"rgb", t.rgb},
              {"depth", t.depth},
              {"transmittance", t.transmittance},
              {"total", t.total}}
             .dump());
}

void RunDirectory::on_view_done(const PipelineState& state, const ViewRecord& rec) {
  const std::string dir = view_dir(rec.view);
  const fs::path base = root_ / dir;
  json files = json::object();
  auto put_png = [&](const char* name, const RgbImage& img) {
    write_png(base / (std::string(name) + ".png"), img);
    files[name] = dir + "/" + name + ".png";
  };
  auto put_pfm = [&](const char* name, const DepthMap& d) {
    write_pfm(base / (std::string(name) + ".pfm"), d);
    files[name] = dir + "/" + name + ".pfm";
  };
  const UpdatedView& done = state.updated.back();
  if (rec.rendered) {
    put_png("rendered", rec.rendered->image);
    put_pfm("rendered_depth", rec.rendered->depth);
  }
  if (rec.mask) {
    write_mask_png(base / "mask.png", rec.mask->missing, rec.mask->width, rec.mask->height);
    files["mask"] = dir + "/mask.png";
  }
  if (rec.inpaint_input) put_png("inpaint_input", *rec.inpaint_input);
  if (rec.estimated) put_pfm("estimated", *rec.estimated);
  put_png("image", done.image);
  put_pfm("depth", done.depth);

  const std::string ckpt = checkpoint_name(rec.view);
  const std::string hash = save_checkpoint(root_ / ckpt, state.grid);

  json event = {{"event", "view_done"},
                {"view", rec.view},
                {"branch", to_string(rec.branch)},
                {"checkpoint", ckpt},
                {"hash", hash},
                {"files", files},
                {"sanitized_depth", rec.sanitized_depth}};
  if (rec.mask) event["mask_pixels"] = rec.mask->count();
  if (rec.selected_candidate) event["selected_candidate"] = *rec.selected_candidate;
  if (rec.alignment) {
    const AlignmentResult& a = *rec.alignment;
    event["alignment"] = {{"scale", a.global.scale},     {"offset", a.global.offset},
                          {"fallback", a.fallback},      {"pairs", a.pairs},
                          {"rmse_raw", a.rmse_raw},      {"rmse_global", a.rmse_global},
                          {"rmse_local", a.rmse_local}};
  }
  if (!rec.losses.empty()) {
    event["loss_first"] = rec.losses.front().total;
    event["loss_last"] = rec.losses.back().total;
  }
  append(event.dump());
}

void RunDirectory::finish(const PipelineState& state) {
  const std::string hash = save_checkpoint(root_ / "checkpoints/final.ckpt", state.grid);
  append(json{{"event", "done"}, {"hash", hash}, {"checkpoint", "checkpoints/final.ckpt"}}.dump());
}

bool RunDirectory::finished() const {
  const auto events = read_log(root_ / "log.jsonl");
  return !events.empty() && events.back().value("event", "") == "done";
}

PipelineState RunDirectory::restore(const RunConfig& config) const {
  PipelineState state;
  state.trajectory = trajectory_views(config);
  std::string last_ckpt;
  std::string last_hash;
  for (const json& e : read_log(root_ / "log.jsonl")) {
    if (e.value("event", "") != "view_done") continue;
    const int id = e.at("view").get<int>();
    if (id < 0 || std::size_t(id) >= state.trajectory.size() || state.is_updated(id)) {
      throw IoError("log names an unexpected view " + std::to_string(id));
    }
    const json& files = e.at("files");
    UpdatedView u{state.trajectory[std::size_t(id)],
                  read_png(root_ / files.at("image").get<std::string>()),
                  read_pfm(root_ / files.at("depth").get<std::string>())};
    if (id == 0) {
      state.initial_image = u.image;
      state.initial_depth = u.depth;
    }
    state.updated.push_back(std::move(u));
    last_ckpt = e.at("checkpoint").get<std::string>();
    last_hash = e.at("hash").get<std::string>();
  }
  if (state.updated.empty() || state.updated.front().view.id != 0) {
    throw IoError("run in " + root_.string() + " has no completed initialization to resume from");
  }
  state.grid = load_checkpoint(root_ / last_ckpt);
  state.checkpoint_hash = checkpoint_hash(state.grid);
  if (state.checkpoint_hash != last_hash) throw CheckpointError("checkpoint hash differs from the log");
  for (int id : visit_order(state.trajectory)) {
    if (!state.is_updated(id)) state.pending.push_back(id);
  }
  return state;
}

GenerateResult generate_run(const fs::path& config_path, bool resume, SceneProvider* provider) {
  const Bytes raw = read_file(config_path);
  const std::string text(raw.begin(), raw.end());
  const RunConfig config = parse_config(text);
  std::unique_ptr<SceneProvider> owned;
  if (!provider) {
    owned = make_provider(config);
    provider = owned.get();
  }

  fs::path root = config.output_dir;
  if (root.is_relative()) root = config_path.parent_path() / root;
  GenerateResult result;
  result.run_dir = root;

  const bool have_run = fs::exists(root / "log.jsonl");
  if (resume && have_run) {
    RunDirectory dir = RunDirectory::open(root);
    if (dir.config_text() != text) throw ConfigError("config differs from the one stored in " + root.string());
    Pipeline pipeline(config, *provider, &dir);
    const auto events = read_log(root / "log.jsonl");
    const bool initialized = std::any_of(events.begin(), events.end(), [](const json& e) {
      return e.value("event", "") == "view_done";
    });
    result.state = initialized ? dir.restore(config) : pipeline.initialize();
    if (!dir.finished()) {
      pipeline.run_pending(result.state);
      dir.finish(result.state);
    }
    return result;
  }

  RunDirectory dir = RunDirectory::create(root, text);
  dir.log_start(config);
  Pipeline pipeline(config, *provider, &dir);
  result.state = pipeline.run();
  dir.finish(result.state);
  return result;
}

}  // namespace scenefield
