#pragma once

#include <chrono>
#include <string>

#include "scenefield/providers.hpp"

namespace scenefield {

struct RemoteOptions {
  std::string url; // scheme://host:port
  double timeout_s = 120.0;
  int attempts = 3;
  std::chrono::milliseconds backoff{250}; // doubled after every failed attempt
};

/// Client for an out-of-process model service. Requests are JSON bodies with images as base64
/// 8-bit PNG, masks as base64 1-bit PNG and depth as base64 float PFM:
///   POST /v1/generate {prompt, width, height, seed}                  -> {image}
///   POST /v1/inpaint  {prompt, image, mask, num_candidates, seed}    -> {candidates: [image...]}
///   POST /v1/depth    {image}                                        -> {depth}
///   POST /v1/embed    {image}                                        -> {vector: [number...]}
/// Errors are non-2xx responses with {code, message}. Transport failures and 5xx answers are
/// retried with exponential backoff (requests carry their seed, so retries are idempotent);
/// 4xx answers fail immediately.
class RemoteProvider : public SceneProvider {
 public:
  explicit RemoteProvider(RemoteOptions options);

  [[nodiscard]] std::string id() const override { return "remote:" + options_.url; }
  [[nodiscard]] const RemoteOptions& options() const { return options_; }

 protected:
  RgbImage do_generate(const std::string& prompt, const CameraViewd& view, std::uint64_t seed) override;
  std::vector<RgbImage> do_inpaint(const InpaintRequest& req, const CameraViewd& view) override;
  DepthMap do_estimate_depth(const RgbImage& image, const CameraViewd& view) override;
  Embedding do_embed(const RgbImage& image) override;

 private:
  /// POSTs a JSON body and returns the parsed JSON answer as text.
  std::string post(const std::string& path, const std::string& body);

  RemoteOptions options_;
};

/// Resolves the service URL: the environment override wins over the configured value.
[[nodiscard]] std::string resolve_provider_url(const std::string& configured);

}  // namespace scenefield
