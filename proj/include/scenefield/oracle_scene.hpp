#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "scenefield/depth_alignment.hpp"
#include "scenefield/providers.hpp"
#include "scenefield/radiance_grid.hpp"

namespace scenefield {

/// Solid box standing inside the room, checkered like the walls.
struct OracleBox {
  Box3 box;
  Vec3 color = Vec3::Constant(0.5);
};

/// Procedural box room: six checkered walls seen from inside plus optional boxes. Wall base
/// colors are drawn from `seed`; checker squares alternate base +/- contrast.
struct OracleSceneSpec {
  Box3 room{Vec3(-2.0, -1.5, -2.0), Vec3(2.0, 1.5, 2.0)};
  double frequency = 2.0; // checker squares per world unit
  double contrast = 0.12;
  std::vector<OracleBox> boxes;
  std::uint64_t seed = 7;

  /// The room used by the shipped configs and tests: two boxes on the floor.
  [[nodiscard]] static OracleSceneSpec standard(std::uint64_t seed = 7);
};

struct OracleHit {
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 color = Vec3::Zero();
  int surface = -1; // 0..5 walls (-x,+x,-y,+y,-z,+z), 6.. boxes
};

class OracleScene {
 public:
  OracleScene() : OracleScene(OracleSceneSpec::standard()) {}
  explicit OracleScene(OracleSceneSpec spec);

  [[nodiscard]] const OracleSceneSpec& spec() const { return spec_; }
  [[nodiscard]] const std::array<Vec3, 6>& wall_colors() const { return walls_; }

  /// First surface along the ray. Origins must lie inside the room.
  [[nodiscard]] std::optional<OracleHit> trace(const Vec3& origin, const Vec3& direction) const;

  /// Checker color of the surface at a point on it.
  [[nodiscard]] Vec3 surface_color(int surface, const Vec3& point, int axis) const;

  struct Render {
    RgbImage image;
    DepthMap depth; // camera z of the first hit
  };
  [[nodiscard]] Render render(const CameraViewd& view) const;

 private:
  OracleSceneSpec spec_;
  std::array<Vec3, 6> walls_;
};

struct OracleOptions {
  bool distort_depth = false;
  /// Fixed noise parameters; when unset they are drawn per request from the provider seed and
  /// the view id.
  std::optional<Distortion> distortion;
  std::uint64_t seed = 0;
};

/// Test double answering every provider call from the ground-truth scene: generation renders the
/// view, inpainting fills the mask with the ground truth, depth is the analytic z-depth.
class OracleProvider : public SceneProvider {
 public:
  explicit OracleProvider(OracleScene scene, OracleOptions options = {});

  [[nodiscard]] std::string id() const override { return "oracle"; }
  [[nodiscard]] const OracleScene& scene() const { return scene_; }
  [[nodiscard]] const OracleOptions& options() const { return options_; }

  /// Noise parameters applied to the depth answer for `view` (nullopt when distortion is off).
  [[nodiscard]] std::optional<Distortion> distortion_for(const CameraViewd& view) const;

 protected:
  RgbImage do_generate(const std::string& prompt, const CameraViewd& view, std::uint64_t seed) override;
  std::vector<RgbImage> do_inpaint(const InpaintRequest& req, const CameraViewd& view) override;
  DepthMap do_estimate_depth(const RgbImage& image, const CameraViewd& view) override;
  Embedding do_embed(const RgbImage& image) override;

 private:
  OracleScene scene_;
  OracleOptions options_;
};

}  // namespace scenefield
