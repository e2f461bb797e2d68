#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "scenefield/camera.hpp"
#include "scenefield/depth_alignment.hpp"
#include "scenefield/losses.hpp"
#include "scenefield/oracle_scene.hpp"
#include "scenefield/radiance_grid.hpp"
#include "scenefield/trajectory.hpp"

namespace scenefield {

/// Invalid or unreadable run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProviderMode { oracle, remote };

struct RunConfig {
  std::string prompt = "a cozy living room";
  int width = 128;
  int height = 128;
  double hfov_deg = 90.0;
  Vec3 origin = Vec3::Zero();
  TrajectorySpec trajectory;

  int support_count = 8;      // satellites per support set
  double support_shift = 0.2; // world units

  LossWeights weights;
  TransmittanceForm transmittance_form = TransmittanceForm::complement;

  int initial_iterations = 1500;
  int update_iterations = 2400;
  int batch_rays = 2048;
  int steps = 128;
  double lr_initial = 0.02;
  double lr_final = 0.002;

  Box3 bbox{Vec3(-2.1, -1.6, -2.1), Vec3(2.1, 1.6, 2.1)};
  Vec3i grid_resolution = Vec3i::Constant(64);
  GridOptions grid;

  LocalOptions local;
  std::size_t max_pairs = kMaxAlignmentPairs;

  double min_mask_fraction = 0.002; // smaller masks are filled by training alone
  int candidates = 30;
  double opacity_floor = 0.5;
  bool dilate = false;

  ProviderMode provider = ProviderMode::oracle;
  std::string provider_url;
  double provider_timeout_s = 120.0;
  OracleSceneSpec oracle_scene = OracleSceneSpec::standard();
  OracleOptions oracle;

  int eval_poses = 100;
  double eval_min_shift = 0.1;
  double eval_max_shift = 0.4;

  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  [[nodiscard]] Intrinsicsd intrinsics() const { return Intrinsicsd::from_fov(width, height, hfov_deg); }
  [[nodiscard]] CameraViewd origin_view() const;
};

/// Parses and validates JSON text; absent keys keep their defaults, unknown keys are rejected.
[[nodiscard]] RunConfig parse_config(const std::string& json_text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
/// Complete JSON form (every field, defaults included).
[[nodiscard]] std::string dump_config(const RunConfig& config);
/// Throws ConfigError naming the first violated constraint.
void validate(const RunConfig& config);

/// Environment variable that overrides the remote provider URL.
inline constexpr const char* kProviderUrlEnv = "SCENEFIELD_PROVIDER_URL";

}  // namespace scenefield
