#include "scenefield/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace scenefield {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, remembering which were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name(key) + ": " + e.what());
    }
  }

  void get_vec3(const char* key, Vec3& out) {
    std::vector<double> v;
    get(key, v);
    if (!obj_.contains(key)) return;
    if (v.size() != 3) throw ConfigError(name(key) + ": expected 3 numbers");
    out = Vec3(v[0], v[1], v[2]);
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!obj_.contains(key)) return std::nullopt;
    return Section(obj_.at(key), name(key));
  }

  [[nodiscard]] bool has(const char* key) const { return obj_.contains(key); }
  [[nodiscard]] const json& raw(const char* key) {
    seen_.insert(key);
    return obj_.at(key);
  }
  [[nodiscard]] std::string name(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + name(key.c_str()) + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

TransmittanceForm parse_form(const std::string& s) {
  if (s == "complement") return TransmittanceForm::complement;
  if (s == "literal") return TransmittanceForm::literal;
  throw ConfigError("loss.transmittance_form: expected 'complement' or 'literal', got '" + s + "'");
}

OracleSceneSpec parse_scene(Section& s, std::uint64_t default_seed) {
  OracleSceneSpec spec = OracleSceneSpec::standard(default_seed);
  Vec3 lo = spec.room.min();
  Vec3 hi = spec.room.max();
  s.get_vec3("room_min", lo);
  s.get_vec3("room_max", hi);
  spec.room = Box3(lo, hi);
  s.get("frequency", spec.frequency);
  s.get("contrast", spec.contrast);
  s.get("seed", spec.seed);
  if (s.has("boxes")) {
    spec.boxes.clear();
    const json& boxes = s.raw("boxes");
    if (!boxes.is_array()) throw ConfigError(s.name("boxes") + ": expected an array");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      Section b(boxes[i], s.name("boxes") + "[" + std::to_string(i) + "]");
      Vec3 bmin = Vec3::Zero();
      Vec3 bmax = Vec3::Zero();
      OracleBox box;
      b.get_vec3("min", bmin);
      b.get_vec3("max", bmax);
      b.get_vec3("color", box.color);
      b.finish();
      box.box = Box3(bmin, bmax);
      spec.boxes.push_back(box);
    }
  }
  s.finish();
  return spec;
}

}  // namespace

CameraViewd RunConfig::origin_view() const {
  return {intrinsics(), Posed::from_center(Mat3::Identity(), origin), 0};
}

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section s(root, "");
  s.get("prompt", c.prompt);
  s.get("width", c.width);
  s.get("height", c.height);
  s.get("hfov_deg", c.hfov_deg);
  s.get_vec3("origin", c.origin);
  std::string traj = to_string(c.trajectory);
  s.get("trajectory", traj);
  try {
    c.trajectory = parse_trajectory(traj);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("trajectory: ") + e.what());
  }
  s.get("seed", c.seed);
  s.get("output_dir", c.output_dir);

  if (auto sup = s.child("support")) {
    sup->get("count", c.support_count);
    sup->get("shift", c.support_shift);
    sup->finish();
  }
  if (auto loss = s.child("loss")) {
    loss->get("rgb", c.weights.rgb);
    loss->get("depth", c.weights.depth);
    loss->get("transmittance", c.weights.transmittance);
    std::string form = c.transmittance_form == TransmittanceForm::complement ? "complement" : "literal";
    loss->get("transmittance_form", form);
    c.transmittance_form = parse_form(form);
    loss->finish();
  }
  if (auto tr = s.child("training")) {
    tr->get("initial_iterations", c.initial_iterations);
    tr->get("update_iterations", c.update_iterations);
    tr->get("batch_rays", c.batch_rays);
    tr->get("steps", c.steps);
    tr->get("lr_initial", c.lr_initial);
    tr->get("lr_final", c.lr_final);
    tr->finish();
  }
  if (auto g = s.child("grid")) {
    Vec3 lo = c.bbox.min();
    Vec3 hi = c.bbox.max();
    g->get_vec3("bbox_min", lo);
    g->get_vec3("bbox_max", hi);
    c.bbox = Box3(lo, hi);
    if (g->has("resolution")) {
      const json& r = g->raw("resolution");
      if (r.is_number_integer()) {
        c.grid_resolution = Vec3i::Constant(r.get<int>());
      } else if (r.is_array() && r.size() == 3) {
        c.grid_resolution = Vec3i(r[0].get<int>(), r[1].get<int>(), r[2].get<int>());
      } else {
        throw ConfigError("grid.resolution: expected an integer or 3 integers");
      }
    }
    g->get("density_scale", c.grid.density_scale);
    g->get("initial_density", c.grid.initial_density);
    g->get("initial_color", c.grid.initial_color);
    g->finish();
  }
  if (auto a = s.child("alignment")) {
    a->get("lattice", c.local.lattice);
    a->get("smoothness", c.local.smoothness);
    a->get("max_pairs", c.max_pairs);
    a->finish();
  }
  if (auto p = s.child("pipeline")) {
    p->get("min_mask_fraction", c.min_mask_fraction);
    p->get("candidates", c.candidates);
    p->get("opacity_floor", c.opacity_floor);
    p->get("dilate", c.dilate);
    p->finish();
  }
  if (auto p = s.child("provider")) {
    std::string mode = "oracle";
    p->get("mode", mode);
    if (mode == "oracle") c.provider = ProviderMode::oracle;
    else if (mode == "remote") c.provider = ProviderMode::remote;
    else throw ConfigError("provider.mode: expected 'oracle' or 'remote', got '" + mode + "'");
    p->get("url", c.provider_url);
    p->get("timeout_s", c.provider_timeout_s);
    if (auto o = p->child("oracle")) {
      o->get("distort_depth", c.oracle.distort_depth);
      if (o->has("tau1") || o->has("tau2")) {
        Distortion d;
        o->get("tau1", d.tau1);
        o->get("tau2", d.tau2);
        c.oracle.distortion = d;
      }
      if (auto sc = o->child("scene")) c.oracle_scene = parse_scene(*sc, c.oracle_scene.seed);
      o->finish();
    }
    p->finish();
  }
  if (auto e = s.child("eval")) {
    e->get("test_poses", c.eval_poses);
    e->get("min_shift", c.eval_min_shift);
    e->get("max_shift", c.eval_max_shift);
    e->finish();
  }
  s.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(c.width > 0 && c.height > 0, "width and height must be positive");
  require(c.hfov_deg > 0.0 && c.hfov_deg < 180.0, "hfov_deg must lie in (0, 180)");
  require(c.origin.allFinite(), "origin must be finite");
  require(c.trajectory.pattern != TrajectoryPattern::orbit || c.trajectory.steps >= 1,
          "orbit trajectory needs steps >= 1");
  require(c.trajectory.yaw_count >= 0 && c.trajectory.pitch_count >= 0, "lattice counts must be >= 0");
  require(c.support_count >= 0, "support.count must be >= 0");
  require(c.support_shift >= 0.0, "support.shift must be >= 0");
  require(c.weights.rgb >= 0.0 && c.weights.depth >= 0.0 && c.weights.transmittance >= 0.0,
          "loss weights must be >= 0");
  require(c.initial_iterations >= 0 && c.update_iterations >= 0, "iteration counts must be >= 0");
  require(c.batch_rays >= 1, "training.batch_rays must be >= 1");
  require(c.steps >= 2, "training.steps must be >= 2");
  require(c.lr_initial > 0.0 && c.lr_final > 0.0, "learning rates must be positive");
  require((c.bbox.sizes().array() > 0.0).all(), "grid bbox must have positive extent");
  require(c.bbox.contains(c.origin), "origin must lie inside the grid bbox");
  require((c.grid_resolution.array() >= 2).all(), "grid.resolution must be >= 2 on every axis");
  require(c.grid.density_scale > 0.0, "grid.density_scale must be positive");
  require(c.grid.initial_density > 0.0, "grid.initial_density must be positive");
  require(c.grid.initial_color > 0.0 && c.grid.initial_color < 1.0, "grid.initial_color must lie in (0, 1)");
  require(c.local.lattice >= 2, "alignment.lattice must be >= 2");
  require(c.local.smoothness >= 0.0, "alignment.smoothness must be >= 0");
  require(c.max_pairs >= 2, "alignment.max_pairs must be >= 2");
  require(c.min_mask_fraction >= 0.0 && c.min_mask_fraction < 1.0, "pipeline.min_mask_fraction must lie in [0, 1)");
  require(c.candidates >= 1, "pipeline.candidates must be >= 1");
  require(c.opacity_floor > 0.0 && c.opacity_floor <= 1.0, "pipeline.opacity_floor must lie in (0, 1]");
  require(c.provider != ProviderMode::remote || !c.provider_url.empty() || std::getenv(kProviderUrlEnv),
          "remote provider needs provider.url or " + std::string(kProviderUrlEnv));
  require(c.provider_timeout_s > 0.0, "provider.timeout_s must be positive");
  require(!c.oracle.distortion || c.oracle.distortion->tau2 > 0.0, "provider.oracle.tau2 must be positive");
  require(c.eval_poses >= 0, "eval.test_poses must be >= 0");
  require(c.eval_min_shift >= 0.0 && c.eval_max_shift >= c.eval_min_shift, "eval shift range is invalid");
  require(!c.output_dir.empty(), "output_dir must not be empty");
}

std::string dump_config(const RunConfig& c) {
  json scene = {{"room_min", vec3_json(c.oracle_scene.room.min())},
                {"room_max", vec3_json(c.oracle_scene.room.max())},
                {"frequency", c.oracle_scene.frequency},
                {"contrast", c.oracle_scene.contrast},
                {"seed", c.oracle_scene.seed},
                {"boxes", json::array()}};
  for (const OracleBox& b : c.oracle_scene.boxes) {
    scene["boxes"].push_back({{"min", vec3_json(b.box.min())},
                              {"max", vec3_json(b.box.max())},
                              {"color", vec3_json(b.color)}});
  }
  json oracle = {{"distort_depth", c.oracle.distort_depth}, {"scene", scene}};
  if (c.oracle.distortion) {
    oracle["tau1"] = c.oracle.distortion->tau1;
    oracle["tau2"] = c.oracle.distortion->tau2;
  }
  json root = {
      {"prompt", c.prompt},
      {"width", c.width},
      {"height", c.height},
      {"hfov_deg", c.hfov_deg},
      {"origin", vec3_json(c.origin)},
      {"trajectory", to_string(c.trajectory)},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"support", {{"count", c.support_count}, {"shift", c.support_shift}}},
      {"loss",
       {{"rgb", c.weights.rgb},
        {"depth", c.weights.depth},
        {"transmittance", c.weights.transmittance},
        {"transmittance_form",
         c.transmittance_form == TransmittanceForm::complement ? "complement" : "literal"}}},
      {"training",
       {{"initial_iterations", c.initial_iterations},
        {"update_iterations", c.update_iterations},
        {"batch_rays", c.batch_rays},
        {"steps", c.steps},
        {"lr_initial", c.lr_initial},
        {"lr_final", c.lr_final}}},
      {"grid",
       {{"bbox_min", vec3_json(c.bbox.min())},
        {"bbox_max", vec3_json(c.bbox.max())},
        {"resolution", json::array({c.grid_resolution.x(), c.grid_resolution.y(), c.grid_resolution.z()})},
        {"density_scale", c.grid.density_scale},
        {"initial_density", c.grid.initial_density},
        {"initial_color", c.grid.initial_color}}},
      {"alignment",
       {{"lattice", c.local.lattice}, {"smoothness", c.local.smoothness}, {"max_pairs", c.max_pairs}}},
      {"pipeline",
       {{"min_mask_fraction", c.min_mask_fraction},
        {"candidates", c.candidates},
        {"opacity_floor", c.opacity_floor},
        {"dilate", c.dilate}}},
      {"provider",
       {{"mode", c.provider == ProviderMode::oracle ? "oracle" : "remote"},
        {"url", c.provider_url},
        {"timeout_s", c.provider_timeout_s},
        {"oracle", oracle}}},
      {"eval",
       {{"test_poses", c.eval_poses}, {"min_shift", c.eval_min_shift}, {"max_shift", c.eval_max_shift}}},
  };
  return root.dump(2) + "\n";
}

}  // namespace scenefield
