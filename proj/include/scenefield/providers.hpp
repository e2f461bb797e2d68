#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenefield/camera.hpp"
#include "scenefield/types.hpp"

namespace scenefield {

/// A provider failed to answer (transport, status, or malformed response).
class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InpaintRequest {
  std::string prompt;
  RgbImage image;
  RegionMask mask;
  int candidates = 30;
  std::uint64_t seed = 0;
};

struct CandidateSet {
  std::vector<RgbImage> candidates;
  std::string provider;
  std::uint64_t seed = 0;
};

using Embedding = Eigen::VectorXd;

/// Generative back end of the pipeline: image generation, masked inpainting, monocular depth and
/// image embedding. Callers use the public non-virtual entry points, which check preconditions
/// and sanitize answers; implementations override the do_* hooks. The view argument carries the
/// camera and resolution of the request; model-backed providers only use its resolution.
class SceneProvider {
 public:
  virtual ~SceneProvider() = default;

  [[nodiscard]] virtual std::string id() const = 0;

  [[nodiscard]] RgbImage generate_initial(const std::string& prompt, const CameraViewd& view,
                                          std::uint64_t seed);
  /// Every returned candidate equals req.image outside the mask bit for bit.
  [[nodiscard]] CandidateSet inpaint(const InpaintRequest& req, const CameraViewd& view);
  /// Non-positive or non-finite depths are marked invalid; their count goes to `sanitized`.
  [[nodiscard]] DepthMap estimate_depth(const RgbImage& image, const CameraViewd& view,
                                        std::size_t* sanitized = nullptr);
  [[nodiscard]] Embedding embed(const RgbImage& image);

 protected:
  virtual RgbImage do_generate(const std::string& prompt, const CameraViewd& view,
                               std::uint64_t seed) = 0;
  virtual std::vector<RgbImage> do_inpaint(const InpaintRequest& req, const CameraViewd& view) = 0;
  virtual DepthMap do_estimate_depth(const RgbImage& image, const CameraViewd& view) = 0;
  virtual Embedding do_embed(const RgbImage& image) = 0;
};

[[nodiscard]] double cosine(const Embedding& a, const Embedding& b);

/// Index of the candidate embedding most similar to the reference; ties keep the lowest index.
[[nodiscard]] std::size_t select_by_embedding(const std::vector<Embedding>& candidates,
                                              const Embedding& reference);

struct Selection {
  std::size_t index = 0;
  RgbImage image;
};
[[nodiscard]] Selection select_candidate(const CandidateSet& set, const RgbImage& reference,
                                         SceneProvider& provider);

/// Centered 8x8 block-mean luminance followed by 8-bin histograms of each channel.
[[nodiscard]] Embedding proxy_embedding(const RgbImage& image);

/// Rounds every channel to the nearest multiple of 1/255 (what an 8-bit file stores).
[[nodiscard]] RgbImage quantize8(const RgbImage& image);

}  // namespace scenefield
