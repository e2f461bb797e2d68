#include <gtest/gtest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <fstream>

#include "scenefield/checkpoint.hpp"
#include "scenefield/image_io.hpp"
#include "support.hpp"

using namespace scenefield;
using nlohmann::json;
using scenefield::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with stdout and stderr captured into files under `dir`.
Outcome run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(SCENEFIELD_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const Bytes a = read_file(out);
  const Bytes b = read_file(err);
  o.out.assign(a.begin(), a.end());
  o.err.assign(b.begin(), b.end());
  return o;
}

json tiny_config() {
  return {{"width", 20},
          {"height", 20},
          {"trajectory", "orbit:steps=2,yaw_step=40"},
          {"seed", 3},
          {"output_dir", "run"},
          {"support", {{"count", 2}}},
          {"training",
           {{"initial_iterations", 30}, {"update_iterations", 10}, {"batch_rays", 128}, {"steps", 32}}},
          {"grid", {{"resolution", 12}}},
          {"pipeline", {{"candidates", 2}}},
          {"eval", {{"test_poses", 3}}}};
}

fs::path write_json(const fs::path& path, const json& j) {
  std::ofstream(path) << j.dump(2);
  return path;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST(Cli, MissingConfigIsAUsageErrorAndCreatesNothing) {
  TempDir dir("cli_missing");
  const Outcome o = run_cli(dir.path(), "generate --config " + (dir.path() / "none.json").string());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("\"error\""), std::string::npos);
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) entries += e.path().extension() != ".txt";
  EXPECT_EQ(entries, 0u);
}

TEST(Cli, BadArgumentsAreUsageErrors) {
  TempDir dir("cli_usage");
  EXPECT_EQ(run_cli(dir.path(), "").code, 2);
  EXPECT_EQ(run_cli(dir.path(), "frobnicate").code, 2);
  EXPECT_EQ(run_cli(dir.path(), "render --ckpt x.ckpt").code, 2);
  json bad = tiny_config();
  bad["training"]["steps"] = 1;
  EXPECT_EQ(run_cli(dir.path(), "generate --config " + write_json(dir.path() / "bad.json", bad).string()).code, 2);
}

TEST(Cli, GenerateRenderEvalEndToEnd) {
  TempDir dir("cli_e2e");
  const fs::path config = write_json(dir.path() / "run.json", tiny_config());
  const Outcome gen = run_cli(dir.path(), "generate --config " + config.string());
  ASSERT_EQ(gen.code, 0) << gen.err;
  const json summary = json::parse(gen.out);
  EXPECT_EQ(summary["views"], 2);
  const fs::path ckpt = dir.path() / "run" / "checkpoints" / "final.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_EQ(summary["hash"], checkpoint_hash(load_checkpoint(ckpt)));

  const fs::path one = dir.path() / "one";
  ASSERT_EQ(run_cli(dir.path(), "render --ckpt " + ckpt.string() + " --traj orbit:steps=1 --width 16 --height 12 --out " +
                                    one.string())
                .code,
            0);
  EXPECT_EQ(count_files(one, ".png"), 1u);
  EXPECT_EQ(count_files(one, ".pfm"), 1u);
  const RgbImage frame = read_png(one / "frame_0000.png");
  EXPECT_TRUE(frame.same_shape(16, 12));

  const fs::path eight = dir.path() / "eight";
  ASSERT_EQ(run_cli(dir.path(), "render --ckpt " + ckpt.string() + " --traj orbit:steps=8,yaw_step=45 --width 8 --height 8 --out " +
                                    eight.string())
                .code,
            0);
  EXPECT_EQ(count_files(eight, ".png"), 8u);
  EXPECT_EQ(count_files(eight, ".pfm"), 8u);
  EXPECT_EQ(run_cli(dir.path(), "render --ckpt " + ckpt.string() + " --traj spiral --out " + eight.string()).code, 2);

  // Scoring is a pure function of the checkpoint and the config.
  const fs::path r1 = dir.path() / "r1.json";
  const fs::path r2 = dir.path() / "r2.json";
  ASSERT_EQ(run_cli(dir.path(), "eval --ckpt " + ckpt.string() + " --oracle " + config.string() + " --report " + r1.string()).code, 0);
  ASSERT_EQ(run_cli(dir.path(), "eval --ckpt " + ckpt.string() + " --oracle " + config.string() + " --report " + r2.string()).code, 0);
  EXPECT_EQ(read_file(r1), read_file(r2));
  const Bytes report_bytes = read_file(r1);
  const json report = json::parse(std::string(report_bytes.begin(), report_bytes.end()));
  EXPECT_EQ(report["per_view"].size(), 3u);
  EXPECT_GT(report["mean_psnr"].get<double>(), 0.0);

  const Outcome sweep = run_cli(dir.path(), "eval --ckpt " + ckpt.string() + " --oracle " + config.string() +
                                                " --sweep-support 0,2 --sweep-shift 0.1");
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  const json s = json::parse(sweep.out);
  EXPECT_EQ(s["support_sweep"].size(), 2u);
  EXPECT_EQ(s["shift_sweep"].size(), 1u);

  // Resuming the finished run changes nothing.
  const Outcome again = run_cli(dir.path(), "generate --resume --config " + config.string());
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(json::parse(again.out)["hash"], summary["hash"]);
  EXPECT_EQ(run_cli(dir.path(), "generate --config " + config.string()).code, 1);
}

TEST(Cli, EvalRefusesRemoteConfigsAndZeroPoses) {
  TempDir dir("cli_eval");
  const RadianceGrid g(Box3(Vec3::Constant(-2.5), Vec3::Constant(2.5)), Vec3i::Constant(4));
  save_checkpoint(dir.path() / "g.ckpt", g);
  const std::string ckpt = (dir.path() / "g.ckpt").string();

  json remote = tiny_config();
  remote["provider"] = {{"mode", "remote"}, {"url", "http://127.0.0.1:9"}};
  const Outcome r = run_cli(dir.path(), "eval --ckpt " + ckpt + " --oracle " + write_json(dir.path() / "r.json", remote).string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("oracle"), std::string::npos);

  json zero = tiny_config();
  zero["eval"]["test_poses"] = 0;
  EXPECT_EQ(run_cli(dir.path(), "eval --ckpt " + ckpt + " --oracle " + write_json(dir.path() / "z.json", zero).string()).code, 2);
}

TEST(Cli, CorruptCheckpointFailsWithExitOne) {
  TempDir dir("cli_corrupt");
  Bytes b = encode_checkpoint(RadianceGrid(Box3(Vec3::Constant(-1), Vec3::Constant(1)), Vec3i::Constant(3)));
  b[100] ^= 1;
  atomic_write(dir.path() / "bad.ckpt", b);
  const Outcome o = run_cli(dir.path(), "render --ckpt " + (dir.path() / "bad.ckpt").string() +
                                            " --traj orbit:steps=1 --out " + (dir.path() / "f").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("hash"), std::string::npos);
}

TEST(Cli, AlignRecoversAPureScale) {
  TempDir dir("cli_align");
  DepthMap rendered(32, 32);
  DepthMap estimated(32, 32);
  BoolArray overlap(32 * 32);
  for (Eigen::Index p = 0; p < rendered.size(); ++p) {
    const double z = 1.0 + double(p % 32) / 16.0 + double(p / 32) / 64.0;
    rendered.set(p, z);
    estimated.set(p, z / 2.5);
    overlap[p] = p % 32 < 24;
  }
  write_pfm(dir.path() / "r.pfm", rendered);
  write_pfm(dir.path() / "e.pfm", estimated);
  write_mask_png(dir.path() / "m.png", overlap, 32, 32);
  const Outcome o = run_cli(dir.path(), "align --rendered " + (dir.path() / "r.pfm").string() + " --estimated " +
                                            (dir.path() / "e.pfm").string() + " --mask " + (dir.path() / "m.png").string() +
                                            " --out " + (dir.path() / "a.pfm").string());
  ASSERT_EQ(o.code, 0) << o.err;
  const json stats = json::parse(o.out);
  // Float storage of both maps limits the recovered scale to about 1e-6.
  EXPECT_NEAR(stats["scale"].get<double>(), 2.5, 1e-5);
  EXPECT_FALSE(stats["fallback"].get<bool>());
  const DepthMap aligned = read_pfm(dir.path() / "a.pfm");
  EXPECT_LE((aligned.values - round_to_float(rendered).values).cwiseAbs().maxCoeff(), 1e-4);

  write_mask_png(dir.path() / "small.png", BoolArray::Constant(16, true), 4, 4);
  EXPECT_EQ(run_cli(dir.path(), "align --rendered " + (dir.path() / "r.pfm").string() + " --estimated " +
                                    (dir.path() / "e.pfm").string() + " --mask " + (dir.path() / "small.png").string())
                .code,
            2);
}
