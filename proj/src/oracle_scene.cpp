#include "scenefield/oracle_scene.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "parallel.hpp"
#include "scenefield/seeding.hpp"
#include "scenefield/volume_render.hpp"

namespace scenefield {

OracleSceneSpec OracleSceneSpec::standard(std::uint64_t seed) {
  OracleSceneSpec s;
  s.seed = seed;
  s.boxes.push_back({Box3(Vec3(0.6, 0.7, 0.8), Vec3(1.4, 1.5, 1.6)), Vec3(0.75, 0.45, 0.3)});
  s.boxes.push_back({Box3(Vec3(-1.5, 0.9, -1.2), Vec3(-0.8, 1.5, -0.4)), Vec3(0.3, 0.55, 0.7)});
  return s;
}

OracleScene::OracleScene(OracleSceneSpec spec) : spec_(std::move(spec)) {
  if (spec_.room.isEmpty() || !(spec_.frequency > 0.0)) {
    throw std::invalid_argument("OracleScene: room must have positive extent and frequency");
  }
  std::mt19937_64 rng(spec_.seed);
  std::uniform_real_distribution<double> base(0.3, 0.7);
  for (Vec3& w : walls_) w = Vec3(base(rng), base(rng), base(rng));
}

Vec3 OracleScene::surface_color(int surface, const Vec3& point, int axis) const {
  const Vec3 base = surface < 6 ? walls_[std::size_t(surface)]
                                : spec_.boxes[std::size_t(surface - 6)].color;
  const int u = (axis + 1) % 3;
  const int v = (axis + 2) % 3;
  const long cell = long(std::floor(point[u] * spec_.frequency)) +
                    long(std::floor(point[v] * spec_.frequency));
  const double sign = (cell & 1) ? -1.0 : 1.0;
  return (base.array() + sign * spec_.contrast).max(0.0).min(1.0);
}

std::optional<OracleHit> OracleScene::trace(const Vec3& origin, const Vec3& direction) const {
  const auto inf = std::numeric_limits<double>::infinity();
  OracleHit best;
  best.t = inf;
  int best_axis = 0;

  // Room walls, seen from inside: the nearest exit plane.
  for (int a = 0; a < 3; ++a) {
    const double d = direction[a];
    if (d == 0.0) continue;
    const double bound = d > 0.0 ? spec_.room.max()[a] : spec_.room.min()[a];
    const double t = (bound - origin[a]) / d;
    if (t > 0.0 && t < best.t) {
      best.t = t;
      best.surface = 2 * a + (d > 0.0 ? 1 : 0);
      best_axis = a;
    }
  }

  for (std::size_t b = 0; b < spec_.boxes.size(); ++b) {
    const Box3& box = spec_.boxes[b].box;
    double t0 = 0.0;
    double t1 = inf;
    int entry_axis = -1;
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      const double d = direction[a];
      if (d == 0.0) {
        miss = origin[a] < box.min()[a] || origin[a] > box.max()[a];
        continue;
      }
      double ta = (box.min()[a] - origin[a]) / d;
      double tb = (box.max()[a] - origin[a]) / d;
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        entry_axis = a;
      }
      t1 = std::min(t1, tb);
      miss = t0 > t1;
    }
    if (miss || entry_axis < 0 || t0 >= best.t) continue;
    best.t = t0;
    best.surface = 6 + int(b);
    best_axis = entry_axis;
  }

  if (best.surface < 0) return std::nullopt;
  best.point = origin + best.t * direction;
  best.color = surface_color(best.surface, best.point, best_axis);
  return best;
}

OracleScene::Render OracleScene::render(const CameraViewd& view) const {
  const int w = view.width();
  const int h = view.height();
  Render out{RgbImage(w, h), DepthMap(w, h)};
  detail::parallel_for(h, [&](long y0, long y1) {
    for (long y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const Rayd ray = camera_ray(view, x, int(y));
        const auto hit = trace(ray.origin, ray.direction);
        if (!hit) continue;
        const Eigen::Index p = out.image.index(x, int(y));
        out.image.pixels.row(p) = hit->color.transpose();
        out.depth.set(p, hit->t * ray.z_scale);
      }
    }
  });
  return out;
}

OracleProvider::OracleProvider(OracleScene scene, OracleOptions options)
    : scene_(std::move(scene)), options_(options) {}

std::optional<Distortion> OracleProvider::distortion_for(const CameraViewd& view) const {
  if (!options_.distort_depth) return std::nullopt;
  if (options_.distortion) return options_.distortion;
  return sample_distortion(derive_seed(options_.seed, "distortion", std::uint64_t(view.id)));
}

RgbImage OracleProvider::do_generate(const std::string&, const CameraViewd& view, std::uint64_t) {
  return scene_.render(view).image;
}

std::vector<RgbImage> OracleProvider::do_inpaint(const InpaintRequest& req, const CameraViewd& view) {
  RgbImage truth = scene_.render(view).image;
  return std::vector<RgbImage>(std::size_t(req.candidates), truth);
}

DepthMap OracleProvider::do_estimate_depth(const RgbImage&, const CameraViewd& view) {
  DepthMap depth = scene_.render(view).depth;
  if (const auto d = distortion_for(view)) return distort_depth(depth, d->tau1, d->tau2);
  return depth;
}

Embedding OracleProvider::do_embed(const RgbImage& image) { return proxy_embedding(image); }

}  // namespace scenefield
