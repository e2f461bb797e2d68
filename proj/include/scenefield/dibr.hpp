#pragma once

#include <span>
#include <vector>

#include "scenefield/camera.hpp"
#include "scenefield/types.hpp"

namespace scenefield {

struct WarpOptions {
  /// Grow the splatted region by one pixel (8-neighborhood) to close resampling pinholes.
  bool dilate = false;
};

struct WarpResult {
  RgbImage image;
  DepthMap depth;     // destination z-depth of the winning splat
  RegionMask missing; // destination pixels no source pixel landed on
};

/// Depth-image-based forward warp of `image`/`depth` from `src` into `dst`. Every valid source
/// pixel is splatted to the nearest destination pixel; the nearest depth wins and equal depths
/// keep the lowest source index. Points behind `dst` or outside its frame are dropped.
[[nodiscard]] WarpResult forward_warp(const RgbImage& image, const DepthMap& depth,
                                      const CameraViewd& src, const CameraViewd& dst,
                                      const WarpOptions& options = {});

/// Destination pixels hit by at least one valid source pixel.
[[nodiscard]] BoolArray splat_coverage(const DepthMap& depth, const CameraViewd& src,
                                       const CameraViewd& dst, const WarpOptions& options = {});

struct KnownView {
  const CameraViewd& view;
  const DepthMap& depth;
};

/// Pixels of `target` that no known view splats into.
[[nodiscard]] RegionMask missing_mask(const CameraViewd& target, std::span<const KnownView> known,
                                      const WarpOptions& options = {});

}  // namespace scenefield
