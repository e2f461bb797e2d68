#include <gtest/gtest.h>

#include <json.hpp>

#include <fstream>
#include <map>

#include "scenefield/checkpoint.hpp"
#include "scenefield/dibr.hpp"
#include "scenefield/image_io.hpp"
#include "scenefield/pipeline.hpp"
#include "scenefield/run_directory.hpp"
#include "scenefield/seeding.hpp"
#include "support.hpp"

using namespace scenefield;
using nlohmann::json;
using scenefield::testing::TempDir;

namespace {

// Small enough that a whole run takes a few seconds.
json small_config(const std::string& trajectory) {
  return {{"width", 24},
          {"height", 24},
          {"trajectory", trajectory},
          {"seed", 11},
          {"support", {{"count", 2}, {"shift", 0.2}}},
          {"training",
           {{"initial_iterations", 40}, {"update_iterations", 20}, {"batch_rays", 128}, {"steps", 32}}},
          {"grid", {{"resolution", 16}}},
          {"pipeline", {{"candidates", 3}}},
          {"eval", {{"test_poses", 4}}}};
}

RunConfig config_of(const json& j) { return parse_config(j.dump()); }

OracleProvider provider_for(const RunConfig& c) {
  OracleOptions o = c.oracle;
  o.seed = derive_seed(c.seed, "provider");
  return OracleProvider(OracleScene(c.oracle_scene), o);
}

// Counts provider calls per view and forwards them to the oracle.
class CountingProvider : public SceneProvider {
 public:
  explicit CountingProvider(OracleProvider inner) : inner_(std::move(inner)) {}
  [[nodiscard]] std::string id() const override { return inner_.id(); }

  std::map<int, int> inpaints;
  int generates = 0;

 protected:
  RgbImage do_generate(const std::string& p, const CameraViewd& v, std::uint64_t s) override {
    ++generates;
    return inner_.generate_initial(p, v, s);
  }
  std::vector<RgbImage> do_inpaint(const InpaintRequest& req, const CameraViewd& v) override {
    ++inpaints[v.id];
    return inner_.inpaint(req, v).candidates;
  }
  DepthMap do_estimate_depth(const RgbImage& img, const CameraViewd& v) override {
    return inner_.estimate_depth(img, v);
  }
  Embedding do_embed(const RgbImage& img) override { return inner_.embed(img); }

 private:
  OracleProvider inner_;
};

struct Recorder : PipelineObserver {
  std::vector<ViewRecord> records;
  void on_view_done(const PipelineState&, const ViewRecord& r) override { records.push_back(r); }
};

std::vector<json> read_events(const std::filesystem::path& log) {
  std::ifstream in(log);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST(SupportSet, SatellitesAreWarpsOfTheCenterView) {
  const OracleScene room;
  const auto center = scenefield::testing::make_view(32, 32, Vec3::Zero(), 0.3);
  const auto gt = room.render(center);
  const SupportSet s = build_support_set(center, gt.image, gt.depth, 4, 0.25);
  ASSERT_EQ(s.satellites.size(), 4u);
  EXPECT_TRUE((s.center.mask == gt.depth.valid).all());
  const auto poses = support_poses(center, 0.25, 4);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const TrainTarget& t = s.satellites[i];
    const WarpResult w = forward_warp(gt.image, gt.depth, center, poses[i]);
    EXPECT_EQ(t.view.pose.rotation, poses[i].pose.rotation);
    EXPECT_EQ(t.image.pixels, w.image.pixels);
    EXPECT_TRUE((t.mask == (w.depth.valid && !w.missing.missing)).all());
    EXPECT_GT(t.mask.count(), t.mask.size() / 2);
  }
  EXPECT_EQ(build_support_set(center, gt.image, gt.depth, 0, 0.25).targets().size(), 1u);
  EXPECT_THROW((void)build_support_set(center, gt.image, gt.depth, -1, 0.25), std::invalid_argument);
}

TEST(Pipeline, InitializationStoresViewZeroAndTheVisitOrder) {
  const RunConfig c = config_of(small_config("orbit:steps=4,yaw_step=30"));
  OracleProvider provider = provider_for(c);
  Pipeline p(c, provider);
  const PipelineState s = p.initialize();
  ASSERT_EQ(s.updated.size(), 1u);
  EXPECT_EQ(s.updated[0].view.id, 0);
  const auto truth = OracleScene(c.oracle_scene).render(s.trajectory[0]);
  EXPECT_EQ(s.initial_image.pixels, quantize8(truth.image).pixels);
  EXPECT_EQ(s.initial_depth.values, round_to_float(truth.depth).values);
  std::vector<int> want = visit_order(s.trajectory);
  want.erase(want.begin());
  EXPECT_EQ(s.pending, want);
  EXPECT_EQ(s.checkpoint_hash, checkpoint_hash(s.grid));
}

TEST(Pipeline, UpdatedViewIsFullyCoveredAfterwards) {
  const RunConfig c = config_of(small_config("orbit:steps=3,yaw_step=40"));
  OracleProvider provider = provider_for(c);
  Recorder rec;
  Pipeline p(c, provider, &rec);
  PipelineState s = p.initialize();
  while (!s.pending.empty()) {
    const int id = s.pending.front();
    const CameraViewd view = s.trajectory[std::size_t(id)];
    EXPECT_FALSE(missing_for(s, view).empty()) << id;
    p.update_view(s, id);
    EXPECT_TRUE(missing_for(s, view).empty()) << id;
    EXPECT_EQ(rec.records.back().branch, UpdateBranch::inpaint);
  }
}

TEST(Pipeline, CoveredViewKeepsTheGridUnchanged) {
  // A zero yaw step repeats view 0, which is then fully covered.
  const RunConfig c = config_of(small_config("orbit:steps=2,yaw_step=0"));
  CountingProvider provider(provider_for(c));
  Recorder rec;
  Pipeline p(c, provider, &rec);
  PipelineState s = p.initialize();
  const std::string before = s.checkpoint_hash;
  p.update_view(s, 1);
  EXPECT_EQ(rec.records.back().branch, UpdateBranch::covered);
  EXPECT_EQ(s.checkpoint_hash, before);
  EXPECT_TRUE(provider.inpaints.empty());
  EXPECT_TRUE(rec.records.back().losses.empty());
}

TEST(Pipeline, EveryViewIsInpaintedAtMostOnceAndCoverageGrows) {
  const RunConfig c = config_of(small_config("orbit:steps=5,yaw_step=35"));
  CountingProvider provider(provider_for(c));
  Pipeline p(c, provider);
  PipelineState s = p.initialize();
  // Probe beyond the trajectory: its missing set may only shrink as views are added.
  CameraViewd probe = s.trajectory[0];
  probe.pose = Posed::from_yaw_pitch(Vec3::Zero(), 1.2, 0.0);
  Eigen::Index prev = missing_for(s, probe).count();
  std::vector<int> visited;
  while (!s.pending.empty()) {
    visited.push_back(s.pending.front());
    p.update_view(s, s.pending.front());
    const Eigen::Index now = missing_for(s, probe).count();
    EXPECT_LE(now, prev);
    prev = now;
  }
  EXPECT_EQ(provider.generates, 1);
  for (const auto& [view, n] : provider.inpaints) EXPECT_EQ(n, 1) << view;
  EXPECT_EQ(s.updated.size(), 5u);
  for (int id : visited) EXPECT_THROW(p.update_view(s, id), std::invalid_argument);
}

TEST(Pipeline, SinglePoseTrajectoryIsJustInitialization) {
  const RunConfig c = config_of(small_config("orbit:steps=1"));
  CountingProvider provider(provider_for(c));
  Pipeline p(c, provider);
  const PipelineState s = p.run();
  EXPECT_EQ(s.updated.size(), 1u);
  EXPECT_TRUE(s.pending.empty());
  EXPECT_TRUE(provider.inpaints.empty());
}

TEST(Pipeline, RunsAreDeterministic) {
  const RunConfig c = config_of(small_config("orbit:steps=3,yaw_step=45"));
  OracleProvider a = provider_for(c);
  OracleProvider b = provider_for(c);
  const PipelineState sa = Pipeline(c, a).run();
  const PipelineState sb = Pipeline(c, b).run();
  EXPECT_EQ(sa.checkpoint_hash, sb.checkpoint_hash);
  EXPECT_TRUE(sa.grid == sb.grid);

  json other = small_config("orbit:steps=3,yaw_step=45");
  other["seed"] = 12;
  const RunConfig c2 = config_of(other);
  OracleProvider d = provider_for(c2);
  EXPECT_NE(Pipeline(c2, d).run().checkpoint_hash, sa.checkpoint_hash);
}

TEST(Pipeline, EvaluationIsReproducible) {
  const RunConfig c = config_of(small_config("orbit:steps=1"));
  OracleProvider provider = provider_for(c);
  Pipeline p(c, provider);
  const PipelineState s = p.initialize();
  const EvalReport a = p.evaluate_initialization(s);
  const EvalReport b = p.evaluate_initialization(s);
  EXPECT_EQ(a.mean_psnr, b.mean_psnr);
  EXPECT_EQ(a.per_view.size(), 4u);
  EXPECT_GT(a.mean_psnr, 0.0);
}

TEST(RunDir, ResumeAfterAnyCompletedViewReproducesTheFinalCheckpoint) {
  TempDir dir("resume");
  const json cfg = small_config("orbit:steps=4,yaw_step=30");

  auto write_config = [&](const std::string& name) {
    json j = cfg;
    j["output_dir"] = name;
    const auto path = dir.path() / (name + ".json");
    std::ofstream(path) << j.dump(2);
    return path;
  };

  const GenerateResult full = generate_run(write_config("full"), false);
  const auto full_events = read_events(full.run_dir / "log.jsonl");
  ASSERT_EQ(full_events.back()["event"], "done");
  const std::string final_hash = full_events.back()["hash"];
  EXPECT_EQ(final_hash, checkpoint_hash(load_checkpoint(full.run_dir / "checkpoints/final.ckpt")));

  for (int keep : {1, 2, 3}) {
    const std::string name = "cut" + std::to_string(keep);
    const auto path = write_config(name);
    const GenerateResult first = generate_run(path, false);
    // Keep the log up to the keep-th view_done, then simulate a torn write.
    std::vector<std::string> lines;
    {
      std::ifstream in(first.run_dir / "log.jsonl");
      std::string line;
      int done = 0;
      while (std::getline(in, line) && done < keep) {
        lines.push_back(line);
        if (json::parse(line)["event"] == "view_done") ++done;
      }
    }
    {
      std::ofstream out(first.run_dir / "log.jsonl", std::ios::trunc);
      for (const auto& l : lines) out << l << '\n';
      out << "{\"event\": \"fit\", \"vi";
    }
    const GenerateResult resumed = generate_run(path, true);
    EXPECT_EQ(resumed.state.checkpoint_hash, checkpoint_hash(full.state.grid)) << keep;
    EXPECT_EQ(resumed.state.updated.size(), 4u);
    EXPECT_EQ(read_file(resumed.run_dir / "checkpoints/final.ckpt"),
              read_file(full.run_dir / "checkpoints/final.ckpt"))
        << keep;
  }
}

TEST(RunDir, RefusesToOverwriteOrToResumeWithAnotherConfig) {
  TempDir dir("refuse");
  json j = small_config("orbit:steps=1");
  j["output_dir"] = "run";
  const auto path = dir.path() / "c.json";
  std::ofstream(path) << j.dump();
  (void)generate_run(path, false);
  EXPECT_THROW((void)generate_run(path, false), IoError);
  // Resuming a finished run is a no-op.
  const GenerateResult again = generate_run(path, true);
  EXPECT_EQ(again.state.updated.size(), 1u);

  j["seed"] = 99;
  std::ofstream(path, std::ios::trunc) << j.dump();
  EXPECT_THROW((void)generate_run(path, true), ConfigError);
}

TEST(RunDir, LogRecordsEveryViewWithItsFiles) {
  TempDir dir("log");
  json j = small_config("orbit:steps=3,yaw_step=45");
  j["output_dir"] = "run";
  const auto path = dir.path() / "c.json";
  std::ofstream(path) << j.dump();
  const GenerateResult r = generate_run(path, false);
  const auto events = read_events(r.run_dir / "log.jsonl");
  EXPECT_EQ(events.front()["event"], "start");
  int views = 0;
  for (const json& e : events) {
    if (e["event"] != "view_done") continue;
    ++views;
    for (const auto& [name, file] : e["files"].items()) {
      EXPECT_TRUE(std::filesystem::exists(r.run_dir / file.get<std::string>())) << name;
    }
    const auto ckpt = r.run_dir / e["checkpoint"].get<std::string>();
    EXPECT_EQ(checkpoint_hash(load_checkpoint(ckpt)), e["hash"].get<std::string>());
  }
  EXPECT_EQ(views, 3);
  EXPECT_EQ(read_file(r.run_dir / "config.json"), read_file(path));
}
