#include "scenefield/dibr.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace scenefield {
namespace {

struct Splat {
  Eigen::VectorXd depth;       // +inf where unhit
  Eigen::VectorXi source;      // winning source pixel, -1 where unhit
};

// Relative transform src camera -> dst camera.
struct RelativeTransform {
  Mat3 rotation;
  Vec3 translation;

  RelativeTransform(const CameraViewd& src, const CameraViewd& dst)
      : rotation(dst.pose.rotation * src.pose.rotation.transpose()),
        translation(dst.pose.translation - rotation * src.pose.translation) {}
};

Splat splat(const DepthMap& depth, const CameraViewd& src, const CameraViewd& dst) {
  const int w = dst.width();
  const int h = dst.height();
  Splat out{Eigen::VectorXd::Constant(Eigen::Index(w) * h, std::numeric_limits<double>::infinity()),
            Eigen::VectorXi::Constant(Eigen::Index(w) * h, -1)};
  const RelativeTransform rel(src, dst);
  const auto& ks = src.intrinsics;
  const auto& kd = dst.intrinsics;

  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const Eigen::Index p = depth.index(x, y);
      if (!depth.valid[p]) continue;
      const Vec3 cam = rel.rotation * ks.unproject(Intrinsicsd::pixel_center(x, y), depth.values[p]) +
                       rel.translation;
      if (!(cam.z() > 0.0)) continue;
      const Vec2 q = kd.project(cam);
      const double fx = std::floor(q.x());
      const double fy = std::floor(q.y());
      if (!(fx >= 0.0 && fy >= 0.0 && fx < w && fy < h)) continue;
      const Eigen::Index d = Eigen::Index(fy) * w + Eigen::Index(fx);
      if (cam.z() < out.depth[d]) {
        out.depth[d] = cam.z();
        out.source[d] = static_cast<int>(p);
      }
    }
  }
  return out;
}

void dilate(Splat& s, int w, int h) {
  const Splat before = s;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Index p = Eigen::Index(y) * w + x;
      if (before.source[p] >= 0) continue;
      double best = std::numeric_limits<double>::infinity();
      int best_src = -1;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const Eigen::Index n = Eigen::Index(ny) * w + nx;
          if (before.source[n] >= 0 && before.depth[n] < best) {
            best = before.depth[n];
            best_src = before.source[n];
          }
        }
      }
      if (best_src >= 0) {
        s.depth[p] = best;
        s.source[p] = best_src;
      }
    }
  }
}

}  // namespace

WarpResult forward_warp(const RgbImage& image, const DepthMap& depth, const CameraViewd& src,
                        const CameraViewd& dst, const WarpOptions& options) {
  if (!image.same_shape(depth.width, depth.height) ||
      !depth.same_shape(src.width(), src.height())) {
    throw std::invalid_argument("forward_warp: image, depth and source view resolutions differ");
  }
  const int w = dst.width();
  const int h = dst.height();
  Splat s = splat(depth, src, dst);
  if (options.dilate) dilate(s, w, h);

  WarpResult out{RgbImage(w, h), DepthMap(w, h), RegionMask(w, h, true)};
  for (Eigen::Index p = 0; p < out.depth.size(); ++p) {
    if (s.source[p] < 0) continue;
    out.image.pixels.row(p) = image.pixels.row(s.source[p]);
    out.depth.set(p, s.depth[p]);
    out.missing.missing[p] = false;
  }
  return out;
}

BoolArray splat_coverage(const DepthMap& depth, const CameraViewd& src, const CameraViewd& dst,
                         const WarpOptions& options) {
  if (!depth.same_shape(src.width(), src.height())) {
    throw std::invalid_argument("splat_coverage: depth resolution differs from source view");
  }
  Splat s = splat(depth, src, dst);
  if (options.dilate) dilate(s, dst.width(), dst.height());
  return s.source.array() >= 0;
}

RegionMask missing_mask(const CameraViewd& target, std::span<const KnownView> known,
                        const WarpOptions& options) {
  if (known.empty()) throw std::invalid_argument("missing_mask: no known views");
  RegionMask mask(target.width(), target.height(), true);
  for (const KnownView& k : known) {
    mask.missing = mask.missing && !splat_coverage(k.depth, k.view, target, options);
  }
  return mask;
}

}  // namespace scenefield
