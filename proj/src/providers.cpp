#include "scenefield/providers.hpp"

#include <algorithm>
#include <cmath>

namespace scenefield {

RgbImage SceneProvider::generate_initial(const std::string& prompt, const CameraViewd& view,
                                         std::uint64_t seed) {
  RgbImage img = do_generate(prompt, view, seed);
  if (!img.same_shape(view.width(), view.height()) || img.pixels.rows() != img.size()) {
    throw ProviderError(id() + ": generated image has the wrong resolution");
  }
  if (!img.pixels.allFinite()) throw ProviderError(id() + ": generated image has non-finite values");
  return img;
}

CandidateSet SceneProvider::inpaint(const InpaintRequest& req, const CameraViewd& view) {
  if (req.mask.size() != req.image.size() || req.mask.width != req.image.width) {
    throw std::invalid_argument("inpaint: mask resolution does not match the image");
  }
  if (req.mask.empty()) throw std::invalid_argument("inpaint: empty mask, nothing to inpaint");
  if (req.candidates < 1) throw std::invalid_argument("inpaint: candidate count must be >= 1");

  std::vector<RgbImage> raw = do_inpaint(req, view);
  if (raw.empty()) throw ProviderError(id() + ": inpainting returned zero candidates");
  CandidateSet out{{}, id(), req.seed};
  out.candidates.reserve(raw.size());
  for (RgbImage& c : raw) {
    if (!c.same_shape(req.image.width, req.image.height) || c.pixels.rows() != c.size()) {
      throw ProviderError(id() + ": inpainting candidate has the wrong resolution");
    }
    if (!c.pixels.allFinite()) throw ProviderError(id() + ": inpainting candidate has non-finite values");
    RgbImage composite = req.image;
    for (Eigen::Index p = 0; p < composite.size(); ++p) {
      if (req.mask.missing[p]) composite.pixels.row(p) = c.pixels.row(p);
    }
    out.candidates.push_back(std::move(composite));
  }
  return out;
}

DepthMap SceneProvider::estimate_depth(const RgbImage& image, const CameraViewd& view,
                                       std::size_t* sanitized) {
  DepthMap d = do_estimate_depth(image, view);
  if (!d.same_shape(image.width, image.height) || d.values.size() != d.size() ||
      d.valid.size() != d.size()) {
    throw ProviderError(id() + ": depth map has the wrong resolution");
  }
  std::size_t bad = 0;
  for (Eigen::Index p = 0; p < d.size(); ++p) {
    if (!d.valid[p]) continue;
    if (!std::isfinite(d.values[p]) || d.values[p] <= 0.0) {
      d.invalidate(p);
      ++bad;
    }
  }
  if (sanitized) *sanitized = bad;
  return d;
}

Embedding SceneProvider::embed(const RgbImage& image) {
  Embedding e = do_embed(image);
  if (e.size() == 0 || !e.allFinite()) throw ProviderError(id() + ": malformed embedding");
  return e;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
  const double den = a.norm() * b.norm();
  return den > 0.0 ? a.dot(b) / den : 0.0;
}

std::size_t select_by_embedding(const std::vector<Embedding>& candidates, const Embedding& reference) {
  if (candidates.empty()) throw std::invalid_argument("select_candidate: no candidates");
  std::size_t best = 0;
  double best_score = cosine(candidates[0], reference);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = cosine(candidates[i], reference);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

Selection select_candidate(const CandidateSet& set, const RgbImage& reference,
                           SceneProvider& provider) {
  if (set.candidates.empty()) throw std::invalid_argument("select_candidate: no candidates");
  if (set.candidates.size() == 1) return {0, set.candidates.front()};
  const Embedding ref = provider.embed(reference);
  std::vector<Embedding> embeddings;
  embeddings.reserve(set.candidates.size());
  for (const RgbImage& c : set.candidates) embeddings.push_back(provider.embed(c));
  const std::size_t k = select_by_embedding(embeddings, ref);
  return {k, set.candidates[k]};
}

Embedding proxy_embedding(const RgbImage& image) {
  constexpr int kBlocks = 8;
  constexpr int kBins = 8;
  Embedding e = Embedding::Zero(kBlocks * kBlocks + 3 * kBins);
  if (image.size() == 0) return e;

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(kBlocks * kBlocks);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto px = image.pixels.row(image.index(x, y));
      const int b = (y * kBlocks / image.height) * kBlocks + x * kBlocks / image.width;
      e[b] += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
      counts[b] += 1.0;
      for (int c = 0; c < 3; ++c) {
        const int bin = std::clamp(int(px[c] * kBins), 0, kBins - 1);
        e[kBlocks * kBlocks + c * kBins + bin] += 1.0;
      }
    }
  }
  auto lum = e.head(kBlocks * kBlocks);
  for (int b = 0; b < kBlocks * kBlocks; ++b) {
    if (counts[b] > 0) lum[b] /= counts[b];
  }
  lum.array() -= lum.mean();
  e.tail(3 * kBins) /= double(image.size());
  return e;
}

RgbImage quantize8(const RgbImage& image) {
  RgbImage out = image;
  out.pixels = (image.pixels.array().max(0.0).min(1.0) * 255.0).round() / 255.0;
  return out;
}

}  // namespace scenefield
