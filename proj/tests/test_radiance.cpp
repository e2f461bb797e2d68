#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scenefield/radiance_grid.hpp"
#include "scenefield/volume_render.hpp"
#include "support.hpp"

using namespace scenefield;
using scenefield::testing::make_view;
using scenefield::testing::random_grid;

namespace {

const Box3 kUnitBox(Vec3::Constant(-1.0), Vec3::Constant(1.0));

// Independent trilinear interpolation over a raw-parameter grid.
Eigen::Vector4d trilinear_oracle(const RadianceGrid& g, const Vec3& x) {
  const Vec3 gpos = (x - g.bbox().min()).cwiseQuotient(g.spacing());
  Eigen::Vector4d out = Eigen::Vector4d::Zero();
  const int i0 = std::min(int(gpos.x()), g.resolution().x() - 2);
  const int j0 = std::min(int(gpos.y()), g.resolution().y() - 2);
  const int k0 = std::min(int(gpos.z()), g.resolution().z() - 2);
  for (int di = 0; di < 2; ++di) {
    for (int dj = 0; dj < 2; ++dj) {
      for (int dk = 0; dk < 2; ++dk) {
        const double w = (1.0 - std::abs(gpos.x() - (i0 + di))) * (1.0 - std::abs(gpos.y() - (j0 + dj))) *
                         (1.0 - std::abs(gpos.z() - (k0 + dk)));
        const Eigen::Vector4d raw = g.raw().col(g.node_index(i0 + di, j0 + dj, k0 + dk));
        Eigen::Vector4d act;
        act << 25.0 * std::log1p(std::exp(raw[0])), 1.0 / (1.0 + std::exp(-raw[1])),
            1.0 / (1.0 + std::exp(-raw[2])), 1.0 / (1.0 + std::exp(-raw[3]));
        out += w * act;
      }
    }
  }
  return out;
}

// Field whose density depends only on z: nodes with z in [z0, z1] hold sigma0, the rest ~0.
RadianceGrid slab_grid(int n, double z0, double z1, double sigma0, const Vec3& color) {
  RadianceGrid g(kUnitBox, Vec3i::Constant(n));
  for (int k = 0; k < n; ++k) {
    const double z = g.node_position(0, 0, k).z();
    const bool inside = z >= z0 - 1e-12 && z <= z1 + 1e-12;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        g.set_node(g.node_index(i, j, k),
                   Eigen::Vector4d(inside ? inverse_softplus(sigma0 / 25.0) : -60.0,
                                   inverse_logistic(color.x()), inverse_logistic(color.y()),
                                   inverse_logistic(color.z())));
      }
    }
  }
  return g;
}

// Piecewise-linear sigma(z) of slab_grid, computed from node values directly.
double slab_sigma(const RadianceGrid& g, double z) {
  const int n = g.resolution().z();
  const double s = (z - g.bbox().min().z()) / g.spacing().z();
  const int k = std::clamp(int(std::floor(s)), 0, n - 2);
  const double f = s - k;
  const double a = 25.0 * softplus(g.raw()(0, g.node_index(0, 0, k)));
  const double b = 25.0 * softplus(g.raw()(0, g.node_index(0, 0, k + 1)));
  return (1.0 - f) * a + f * b;
}

struct FineOracle {
  double opacity = 0.0;
  double depth = 0.0; // ray distance
};

// 1e5-step quadrature of the continuous emission-absorption integrals, with the optical depth
// integrated by the trapezoid rule on the same fine lattice.
FineOracle fine_slab_oracle(const RadianceGrid& g, const Rayd& ray, double t0, double t1) {
  constexpr int kSteps = 100000;
  const double dt = (t1 - t0) / kSteps;
  double tau = 0.0;
  FineOracle out;
  double prev = slab_sigma(g, ray.at(t0).z());
  for (int i = 0; i < kSteps; ++i) {
    const double t = t0 + (i + 0.5) * dt;
    const double mid = slab_sigma(g, ray.at(t).z());
    const double next = slab_sigma(g, ray.at(t0 + (i + 1) * dt).z());
    const double tau_mid = tau + 0.25 * (prev + mid) * dt;
    const double trans = std::exp(-tau_mid);
    out.opacity += trans * mid * dt;
    out.depth += trans * mid * t * dt;
    tau += 0.5 * (prev + next) * dt;
    prev = next;
  }
  return out;
}

// Density raw low enough that exp(-sigma * delta) rounds to exactly 1.
RadianceGrid empty_grid(int n) {
  NodeMatrix raw = NodeMatrix::Zero(4, Eigen::Index(n) * n * n);
  raw.row(0).setConstant(-100.0);
  return RadianceGrid(kUnitBox, Vec3i::Constant(n), 25.0, std::move(raw));
}

Rayd make_ray(const Vec3& origin, const Vec3& dir) {
  Rayd r;
  r.origin = origin;
  r.direction = dir.normalized();
  return r;
}

}  // namespace

TEST(Grid, ActivationsStayInRange) {
  const RadianceGrid g = random_grid(6, 1, -20.0, 20.0);
  EXPECT_GE(g.activated().row(0).minCoeff(), 0.0);
  EXPECT_GE(g.activated().bottomRows(3).minCoeff(), 0.0);
  EXPECT_LE(g.activated().bottomRows(3).maxCoeff(), 1.0);
}

TEST(Grid, ConstantFieldQueriesToItsValue) {
  GridOptions o;
  o.initial_density = 3.0;
  o.initial_color = 0.25;
  const RadianceGrid g(kUnitBox, Vec3i(5, 6, 7), o);
  const FieldSample s = query(g, Vec3(0.3, -0.7, 0.11));
  EXPECT_NEAR(s.density, 3.0, 1e-12);
  EXPECT_NEAR((s.color - Vec3::Constant(0.25)).norm(), 0.0, 1e-12);
}

TEST(Grid, OutsideTheBoxIsEmpty) {
  const RadianceGrid g = random_grid(4, 2);
  const FieldSample s = query(g, Vec3(1.01, 0.0, 0.0));
  EXPECT_EQ(s.density, 0.0);
  EXPECT_TRUE(s.color.isZero(0.0));
}

TEST(Grid, CornersReturnStoredValuesAndInteriorMatchesTrilinearOracle) {
  const RadianceGrid g = random_grid(7, 3);
  for (int k : {0, 3, 6}) {
    const Eigen::Index n = g.node_index(k, 6 - k, 2);
    const FieldSample s = query(g, g.node_position(k, 6 - k, 2));
    EXPECT_NEAR(s.density, g.activated()(0, n), 1e-12);
    EXPECT_NEAR((s.color - g.activated().col(n).tail<3>()).norm(), 0.0, 1e-12);
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x(u(rng), u(rng), u(rng));
    const FieldSample s = query(g, x);
    const Eigen::Vector4d want = trilinear_oracle(g, x);
    EXPECT_NEAR(s.density, want[0], 1e-6);
    EXPECT_NEAR((s.color - want.tail<3>()).norm(), 0.0, 1e-6);
  }
}

TEST(Grid, RejectsDegenerateShapes) {
  EXPECT_THROW(RadianceGrid(kUnitBox, Vec3i(1, 4, 4)), std::invalid_argument);
  GridOptions o;
  o.initial_density = 0.0;
  EXPECT_THROW(RadianceGrid(kUnitBox, Vec3i::Constant(4), o), std::invalid_argument);
  EXPECT_THROW(RadianceGrid(Box3(Vec3::Zero(), Vec3(1, 0, 1)), Vec3i::Constant(4)),
               std::invalid_argument);
}

TEST(Render, EmptySpaceIsBlackAndTransparent) {
  const RadianceGrid g = empty_grid(4);
  const RenderSample s = render_ray(g, make_ray(Vec3(0, 0, -3), Vec3::UnitZ()), 64);
  EXPECT_TRUE(s.color.isZero(0.0));
  EXPECT_EQ(s.opacity, 0.0);
  EXPECT_EQ(s.final_transmittance, 1.0);
}

TEST(Render, RayMissingTheBoxRendersNothing) {
  const RadianceGrid g = random_grid(4, 6);
  const RenderSample s = render_ray(g, make_ray(Vec3(0, 3, -3), Vec3::UnitZ()), 64);
  EXPECT_EQ(s.opacity, 0.0);
  EXPECT_TRUE(s.color.isZero(0.0));
}

TEST(Render, HomogeneousBoxMatchesClosedForm) {
  GridOptions o;
  o.initial_density = 0.7;
  o.initial_color = 0.3;
  const RadianceGrid g(kUnitBox, Vec3i::Constant(5), o);
  // Ray crossing the full box along z: length 2.
  const RenderSample s = render_ray(g, make_ray(Vec3(0.2, 0.1, -5.0), Vec3::UnitZ()), 37);
  const double opacity = 1.0 - std::exp(-0.7 * 2.0);
  EXPECT_NEAR(s.opacity, opacity, 1e-12);
  EXPECT_NEAR((s.color - Vec3::Constant(0.3 * opacity)).norm(), 0.0, 1e-12);
}

TEST(Render, SlabMatchesFineQuadratureOracle) {
  const Vec3 c0(0.2, 0.6, 0.9);
  const RadianceGrid g = slab_grid(9, -0.25, 0.5, 4.0, c0);
  const Rayd ray = make_ray(Vec3(0.1, -0.05, -3.0), Vec3(0.05, 0.02, 1.0));
  const RayInterval span = clip_to_box(ray, g.bbox());
  const FineOracle want = fine_slab_oracle(g, ray, span.t_near, span.t_far);
  const RenderSample s = render_ray(g, ray, 1024);
  EXPECT_NEAR(s.opacity, want.opacity, 1e-3 * want.opacity);
  EXPECT_NEAR(s.depth, want.depth, 1e-3 * want.depth);
  EXPECT_NEAR((s.color - want.opacity * c0).norm(), 0.0, 1e-3 * (want.opacity * c0).norm());
}

TEST(Render, QuadratureConvergesAsStepsDouble) {
  // 10 nodes put the density kinks at ninths of the box, off every midpoint lattice.
  const RadianceGrid g = slab_grid(10, -0.3, 0.45, 6.0, Vec3(0.5, 0.5, 0.5));
  const Rayd ray = make_ray(Vec3(0.1, -0.05, -3.0), Vec3(0.05, 0.02, 1.0));
  const RayInterval span = clip_to_box(ray, g.bbox());
  const FineOracle want = fine_slab_oracle(g, ray, span.t_near, span.t_far);
  auto error = [&](int steps) {
    const RenderSample s = render_ray(g, ray, steps);
    return std::abs(s.opacity - want.opacity) + std::abs(s.depth - want.depth);
  };
  const double coarse = error(16);
  EXPECT_GT(coarse, 0.0);
  for (int steps = 32; steps <= 1024; steps *= 2) EXPECT_LE(error(steps), coarse) << steps;
  EXPECT_LT(error(1024), 1e-2 * coarse);
}

TEST(Render, OpaqueWallReturnsItsColorAndDistance) {
  const RadianceGrid g = slab_grid(17, 0.25, 0.25, 1e5, Vec3(0.9, 0.1, 0.4));
  const int steps = 256;
  const Rayd ray = make_ray(Vec3(0.0, 0.0, -2.0), Vec3::UnitZ());
  const RenderSample s = render_ray(g, ray, steps);
  const double step = 2.0 / steps;
  EXPECT_NEAR(s.opacity, 1.0, 1e-9);
  EXPECT_NEAR((s.color - Vec3(0.9, 0.1, 0.4)).norm(), 0.0, 1e-6);
  EXPECT_NEAR(s.depth, 2.25, 2.0 * step + g.spacing().z());
}

TEST(Render, WeightsAndTransmittanceConserveAndDecrease) {
  const RadianceGrid g = random_grid(8, 9, -4.0, 1.0);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const Rayd ray = make_ray(Vec3(u(rng), u(rng), u(rng)) * 2.0, Vec3(u(rng), u(rng), u(rng)));
    const RenderSample s = render_ray(g, ray, 64, true);
    EXPECT_NEAR(s.weight_sum + s.final_transmittance, 1.0, 1e-6);
    EXPECT_NEAR(s.opacity, 1.0 - s.final_transmittance, 1e-15);
    if (!s.trace.transmittance.empty()) {
      EXPECT_EQ(s.trace.transmittance.front(), 1.0);
    }
    for (std::size_t k = 1; k < s.trace.transmittance.size(); ++k) {
      EXPECT_LE(s.trace.transmittance[k], s.trace.transmittance[k - 1]);
    }
  }
}

TEST(Render, ZDepthIsRayDepthTimesDirectionZ) {
  const RadianceGrid g = random_grid(6, 12, -1.0, 2.0);
  const auto view = make_view(8, 8, Vec3(0, 0, -3.0));
  const Rayd ray = camera_ray(view, 1, 6);
  EXPECT_NEAR(ray.direction.norm(), 1.0, 1e-12);
  const RenderSample s = render_ray(g, ray, 64);
  EXPECT_NEAR(s.z_depth, s.depth * view.pose.to_camera(ray.origin + ray.direction).z(), 1e-12);
}

TEST(Render, RejectsTooFewSteps) {
  const RadianceGrid g = random_grid(3, 1);
  EXPECT_THROW((void)render_ray(g, make_ray(Vec3(0, 0, -3), Vec3::UnitZ()), 1), std::invalid_argument);
}

TEST(RenderView, EmptyGridHasNoValidDepth) {
  const RadianceGrid g = empty_grid(4);
  const RenderedView r = render_view(g, make_view(8, 8, Vec3(0, 0, -3)), 32);
  EXPECT_FALSE(r.depth.valid.any());
}

TEST(RenderView, DepthMapIsTheSurfaceDepthOfASemiTransparentLayer) {
  // Thin layer at z = 0.25 (tent profile of half-width 0.125), optical depth 7.2 * 0.125 = 0.9.
  const RadianceGrid g = slab_grid(17, 0.25, 0.25, 7.2, Vec3(0.5, 0.5, 0.5));
  const auto view = make_view(9, 9, Vec3(0, 0, -3.0));
  const RenderedView r = render_view(g, view, 512);
  const Eigen::Index p = r.image.index(4, 4);
  ASSERT_TRUE(r.depth.valid[p]);
  // The center ray runs along +z, so ray distance is z-depth. Surface depth is the oracle's
  // weight-summed depth over its opacity; the weight-summed map value falls short by the opacity.
  const FineOracle o = fine_slab_oracle(g, make_ray(Vec3(0, 0, -3.0), Vec3::UnitZ()), 2.0, 4.0);
  ASSERT_NEAR(o.opacity, 1.0 - std::exp(-0.9), 1e-6);
  EXPECT_NEAR(r.opacity[p], o.opacity, 1e-3 * o.opacity);
  EXPECT_NEAR(r.depth.values[p], o.depth / o.opacity, 1e-3 * o.depth / o.opacity);
  EXPECT_NEAR(r.z_depth[p], r.opacity[p] * r.depth.values[p], 1e-9);
  EXPECT_LT(r.z_depth[p], 0.7 * 3.25);
}

TEST(RenderView, SingleOpaqueNodeOnlyAffectsItsNeighborhood) {
  RadianceGrid g = empty_grid(17);
  g.set_node(g.node_index(8, 8, 8), Eigen::Vector4d(2000.0, 0.0, 0.0, 0.0));
  const auto view = make_view(33, 33, Vec3(0, 0, -3.0));
  const RenderedView r = render_view(g, view, 256);
  // The node at the box center projects to the image center; its trilinear support spans one
  // spacing (0.125) on each side, about 1.4 pixels at distance 3 with f = 16.5.
  const double radius = view.intrinsics.fx * g.spacing().x() / (3.0 - g.spacing().z()) + 1.0;
  int lit = 0;
  for (int y = 0; y < 33; ++y) {
    for (int x = 0; x < 33; ++x) {
      if (r.opacity[r.image.index(x, y)] <= 1e-9) continue;
      ++lit;
      EXPECT_LE(std::hypot(x + 0.5 - 16.5, y + 0.5 - 16.5), radius) << x << "," << y;
    }
  }
  EXPECT_GT(lit, 0);
  EXPECT_GT(r.opacity[r.image.index(16, 16)], 0.5);
}

namespace {

// Scalar objective L = sum_p <a_c, C_p> + a_z z_p + sum_i a_T,i T_p,i rendered over a view.
double adjoint_objective(const RadianceGrid& g, const CameraViewd& view, int steps,
                         const ViewAdjoints& a) {
  double total = 0.0;
  for (int y = 0; y < view.height(); ++y) {
    for (int x = 0; x < view.width(); ++x) {
      const Eigen::Index p = Eigen::Index(y) * view.width() + x;
      const RenderSample s = render_ray(g, camera_ray(view, x, y), steps, true);
      total += a.color.row(p).dot(s.color.transpose()) + a.z_depth[p] * s.z_depth;
      for (std::size_t i = 0; i < s.trace.transmittance.size(); ++i) {
        total += a.transmittance[std::size_t(p)][i] * s.trace.transmittance[i];
      }
    }
  }
  return total;
}

}  // namespace

TEST(Gradients, RenderWithGradientsMatchesFiniteDifferences) {
  RadianceGrid g = random_grid(8, 21, -3.0, 0.5);
  const auto view = make_view(4, 4, Vec3(0.05, -0.1, -2.2), 0.1, 0.05, 60.0);
  const int steps = 48;
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ViewAdjoints a{ColorMatrix(16, 3), Eigen::VectorXd(16), {}};
  for (Eigen::Index k = 0; k < a.color.size(); ++k) a.color.data()[k] = u(rng);
  for (Eigen::Index k = 0; k < 16; ++k) a.z_depth[k] = u(rng);
  for (int p = 0; p < 16; ++p) {
    const RenderSample s = render_ray(g, camera_ray(view, p % 4, p / 4), steps, true);
    std::vector<double> t(s.trace.t.size());
    for (double& v : t) v = u(rng);
    a.transmittance.push_back(t);
  }
  const GridGradient grad = render_with_gradients(g, view, steps, a);

  const double h = 1e-3;
  int checked = 0;
  for (Eigen::Index k = 0; k < g.parameter_count(); ++k) {
    const double x0 = g.parameter(k);
    g.set_parameter(k, x0 + h);
    const double up = adjoint_objective(g, view, steps, a);
    g.set_parameter(k, x0 - h);
    const double down = adjoint_objective(g, view, steps, a);
    g.set_parameter(k, x0);
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(grad[k] - fd);
    EXPECT_TRUE(err <= 1e-6 || err <= 1e-4 * std::abs(fd)) << "param " << k << " analytic " << grad[k]
                                                           << " fd " << fd;
    checked += fd != 0.0;
  }
  EXPECT_GT(checked, 100);
}

TEST(Gradients, ZeroAdjointsGiveZeroGradient) {
  const RadianceGrid g = random_grid(5, 4);
  const auto view = make_view(6, 6, Vec3(0, 0, -3));
  const ViewAdjoints a{ColorMatrix::Zero(36, 3), Eigen::VectorXd::Zero(36), {}};
  const GridGradient grad = render_with_gradients(g, view, 32, a);
  EXPECT_TRUE(grad.values().isZero(0.0));
}

TEST(Gradients, SinglePixelAdjointStaysInsideItsRayTube) {
  const RadianceGrid g = random_grid(10, 8, -2.0, 1.0);
  const auto view = make_view(9, 9, Vec3(0, 0, -3));
  ViewAdjoints a{ColorMatrix::Zero(81, 3), Eigen::VectorXd::Zero(81), {}};
  const Eigen::Index p = 2 * 9 + 6;
  a.color.row(p) << 1.0, -0.5, 0.25;
  a.z_depth[p] = 0.3;
  const GridGradient grad = render_with_gradients(g, view, 64, a);
  const Rayd ray = camera_ray(view, 6, 2);
  const double tube = g.spacing().norm();
  int nonzero = 0;
  for (int k = 0; k < 10; ++k) {
    for (int j = 0; j < 10; ++j) {
      for (int i = 0; i < 10; ++i) {
        const Eigen::Index n = g.node_index(i, j, k);
        if (grad.values().col(n).isZero(0.0)) continue;
        ++nonzero;
        const Vec3 rel = g.node_position(i, j, k) - ray.origin;
        const double dist = (rel - rel.dot(ray.direction) * ray.direction).norm();
        EXPECT_LE(dist, tube);
      }
    }
  }
  EXPECT_GT(nonzero, 0);
}

TEST(Gradients, AdjointShapeMismatchIsRejected) {
  const RadianceGrid g = random_grid(3, 1);
  const auto view = make_view(4, 4, Vec3(0, 0, -3));
  const ViewAdjoints a{ColorMatrix::Zero(15, 3), Eigen::VectorXd::Zero(16), {}};
  EXPECT_THROW((void)render_with_gradients(g, view, 16, a), std::invalid_argument);
}
