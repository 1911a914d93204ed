#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "rodhom/probe3d.hpp"

using namespace rodhom;

namespace {

std::shared_ptr<const TriMesh2D> disc_mesh(int res) {
  static std::map<int, std::shared_ptr<const TriMesh2D>> cache;
  auto& m = cache[res];
  if (!m) m = std::make_shared<const TriMesh2D>(normalize_axes(build_primitive(PrimitiveKind::disc, {1.0}, res)).first);
  return m;
}

std::shared_ptr<const TensorGrid> grid(double h, int cells = 12, double length = 1.0, int res = 200) {
  return std::make_shared<const TensorGrid>(disc_mesh(res), length, cells, h);
}

double correlation(const VectorXd& a, const VectorXd& b) {
  const VectorXd x = a.array() - a.mean(), y = b.array() - b.mean();
  return x.dot(y) / (x.norm() * y.norm());
}

Field3D displacement(const Field3D& y) {
  const double h = y.grid->h();
  Field3D u = Field3D::sample(y.grid, [h](double x1, double x2, double x3) { return Vector3d(-x1, -h * x2, -h * x3); });
  for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] += y.values[i];
  return u;
}

}  // namespace

TEST(Griso, RigidDisplacementHasNoRodOrRemainderPart) {
  const auto g = grid(0.1);
  const Vector3d c(0.3, -1.0, 2.0);
  const Matrix3d s = hat(Vector3d(0.7, -0.2, 0.5));
  const Field3D u = Field3D::sample(g, [&](double x1, double x2, double x3) {
    return Vector3d(c + s * Vector3d(x1, 0.1 * x2, 0.1 * x3));
  });
  const auto p = griso_decompose(u);
  EXPECT_LE(p.z.max_abs(), 1e-12);
  EXPECT_LE(p.phi1.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(p.phi2.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(p.w.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((p.a - c).norm(), 1e-12);
  EXPECT_LE((p.B - s).norm(), 1e-12);
  const auto n = griso_norms(u, p);
  EXPECT_LE(n.strain, 1e-12);
  EXPECT_LE(n.rod, 1e-11);
  EXPECT_LE(n.remainder, 1e-11);
}

TEST(Griso, TorsionRecoversTwistProfile) {
  const double h = 0.2;
  const auto g = grid(h, 20, 2.0);
  auto t = [](double x1) { return std::sin(x1) + x1 * x1; };
  const Field3D u = Field3D::sample(g, [&](double x1, double x2, double x3) {
    return Vector3d(0.0, -h * x3 * t(x1), h * x2 * t(x1));
  });
  const auto p = griso_decompose(u);
  for (int j = 0; j <= g->cells(); ++j) EXPECT_NEAR(p.w[j], -h * (t(g->x1(j)) - t(0.0)), 1e-13);
  EXPECT_LE(griso_residual(u, p), 1e-12);
}

TEST(Griso, RandomFieldsReconstructAndObeyFrozenEstimates) {
  const auto g = grid(0.1, 16, 1.5);
  const GrisoConstants c = fit_griso_constants(g, 100, 2024);
  EXPECT_GT(c.rod, 0.0);
  EXPECT_GT(c.remainder, 0.0);
  std::mt19937_64 rng(77);
  for (int k = 0; k < 50; ++k) {
    const Field3D u = random_smooth_field(g, rng);
    const auto p = griso_decompose(u);
    EXPECT_LE(griso_residual(u, p), 1e-10);
    const auto n = griso_norms(u, p);
    EXPECT_LE(n.rod, c.rod * n.strain) << "sample " << k;
    EXPECT_LE(n.remainder, c.remainder * n.strain) << "sample " << k;
  }
}

TEST(Griso, ConstantsHoldAcrossThickness) {
  // The lemma's constant is independent of h: fit at one thickness,
  // check at the others.
  const GrisoConstants c = fit_griso_constants(grid(0.1, 16), 100, 5);
  for (double h : {0.2, 0.05}) {
    const auto g = grid(h, 16);
    std::mt19937_64 rng(static_cast<std::uint64_t>(1000 * h));
    for (int k = 0; k < 20; ++k) {
      const Field3D u = random_smooth_field(g, rng);
      const auto n = griso_norms(u, griso_decompose(u));
      EXPECT_LE(n.rod, c.rod * n.strain) << "h " << h << " sample " << k;
      EXPECT_LE(n.remainder, c.remainder * n.strain) << "h " << h << " sample " << k;
    }
  }
}

TEST(Strain, IdentityAndRotatedRestAreUnstrained) {
  const double h = 0.1;
  const auto g = grid(h);
  const Field3D rest = Field3D::sample(g, [h](double x1, double x2, double x3) { return Vector3d(x1, h * x2, h * x3); });
  const std::vector<Matrix3d> ident(g->cells(), Matrix3d::Identity());
  for (const auto& m : approximate_strain(rest, ident)) EXPECT_LE(m.norm(), 1e-12);
  const Matrix3d r = rodrigues(Vector3d(0.4, 1.0, -0.3));
  Field3D turned(g);
  for (std::size_t i = 0; i < rest.values.size(); ++i) turned.values[i] = r * rest.values[i];
  for (const auto& m : approximate_strain(turned, std::vector<Matrix3d>(g->cells(), r))) EXPECT_LE(m.norm(), 1e-11);
  const auto law = make_isotropic(1.0, 1.0);
  EXPECT_LE(probe_energy(rest, law).value, 1e-20);
  EXPECT_LE(probe_energy(turned, law).value, 1e-20);
  EXPECT_TRUE(probe_energy(turned, law).inverted_cells.empty());
}

TEST(Recovery, RestConfigurationForIdentityFrame) {
  const double h = 0.2;
  const auto g = grid(h);
  const FrameCurve frame = FrameCurve::constant(1.0, g->cells());
  const Field3D y = build_recovery(frame, {}, nullptr, g);
  for (int j = 0; j <= g->cells(); ++j) {
    for (std::size_t v = 0; v < g->vertices(); ++v) {
      const Vector2d& p = g->section_point(v);
      EXPECT_LE((y.at(j, v) - Vector3d(g->x1(j), h * p.x(), h * p.y())).norm(), 1e-15);
    }
  }
  for (const auto& m : approximate_strain(y, frame)) EXPECT_LE(m.norm(), 1e-12);
}

TEST(Recovery, GradientApproachesFrame) {
  double previous = 1e300;
  for (double h : {0.2, 0.1, 0.05}) {
    const auto g = grid(h, 40);
    const FrameCurve frame = frame_reconstruct(StrainCurve::constant(1.0, 40, {0.3, 0.0, -1.0}));
    const Field3D y = build_recovery(frame, {}, nullptr, g);
    const auto rmid = midpoint_rotations(frame);
    double dev = 0.0;
    for (int e = 0; e < g->cells(); ++e) {
      for (std::size_t t = 0; t < g->triangles(); ++t) dev = std::max(dev, (y.cell_gradient(e, t) - rmid[e]).norm());
    }
    EXPECT_LT(dev, previous) << "h = " << h;
    previous = dev;
  }
}

TEST(Recovery, ApproximateStrainNearLimitStrain) {
  const auto mesh = disc_mesh(400);
  const auto law = make_isotropic(1.0, 1.0);
  SectionCorrectors c;
  effective_matrix(*mesh, law.quadratic(), {1e-10, 1}, &c);
  const Vector3d axial(0.4, 0.2, -1.0);
  const StrainLoad load{0.0, -axial.z(), axial.y(), -axial.x()};
  const VectorXd beta = c.combine(load);
  // Averaging the section columns over a layer costs O(dx^2 / h) in G, so
  // the layer count follows h.
  auto distance = [&](double h, bool pointwise) {
    const int cells = static_cast<int>(std::lround(2.0 / h));
    auto g = std::make_shared<const TensorGrid>(mesh, 1.0, cells, h);
    const FrameCurve frame = frame_reconstruct(StrainCurve::constant(1.0, cells, axial));
    const Field3D y = build_recovery(frame, {}, &c, g, pointwise);
    return detail::limit_strain_distance(approximate_strain(y, frame), *g, load, beta);
  };
  EXPECT_LE(distance(0.1, false), 0.1);
  EXPECT_LT(distance(0.05, false), distance(0.1, false));
  // The pointwise (A vbar)_1 term keeps an O(1) defect.
  EXPECT_GT(distance(0.05, true), 0.5 * distance(0.1, true));
  EXPECT_GT(distance(0.05, true), 0.05);
}

TEST(Probe, LadderApproachesLimitEnergy) {
  const auto mesh = disc_mesh(400);
  const auto law = make_isotropic(1.0, 1.0);
  const auto rep = run_probe(*mesh, law, Vector3d(0, 0, -1));
  ASSERT_EQ(rep.levels.size(), 3u);
  EXPECT_TRUE(rep.gaps_decreasing());
  EXPECT_LE(rep.levels.back().relative_gap, 0.1);
  EXPECT_GE(rep.min_energy_ratio(), 0.85);
  EXPECT_NEAR(rep.a, 0.0, 1e-8);
  for (const auto& l : rep.levels) {
    EXPECT_EQ(l.inverted_cells, 0u);
    EXPECT_LE(l.griso_residual, 1e-10);
  }
}

TEST(Probe, CentroidRuleSitsBelowEdgeRule) {
  // Q is convex and the macro strain is linear per triangle, so the
  // one-point rule underestimates.
  const auto mesh = disc_mesh(200);
  const auto law = make_isotropic(1.0, 1.0);
  ProbeOptions o;
  o.ladder = {0.05};
  o.quadrature = ProbeQuadrature::centroid;
  const auto centroid = run_probe(*mesh, law, Vector3d(0, 0, -1), o);
  o.quadrature = ProbeQuadrature::edge_midpoint;
  const auto edge = run_probe(*mesh, law, Vector3d(0, 0, -1), o);
  EXPECT_LT(centroid.levels[0].energy, edge.levels[0].energy);
  EXPECT_LT(edge.levels[0].relative_gap, centroid.levels[0].relative_gap);
}

TEST(Probe, GrisoPartsTrackImposedProfiles) {
  const double h = 0.05, tau = 0.6, kappa = 0.8;
  const auto g = grid(h, 40);
  const FrameCurve frame = frame_reconstruct(StrainCurve::constant(1.0, 40, {tau, 0.0, -kappa}));
  const auto p = griso_decompose(displacement(build_recovery(frame, {}, nullptr, g)));
  VectorXd bend(41), twist(41);
  for (int j = 0; j <= 40; ++j) {
    const double x1 = g->x1(j);
    bend[j] = -h * kappa * x1 * x1 / 2;
    twist[j] = -h * tau * x1;
  }
  EXPECT_GE(correlation(p.phi1, bend), 0.99);
  EXPECT_GE(correlation(p.w, twist), 0.99);
}

TEST(Probe, RigidityConstantFrozenOnFirstLevel) {
  const auto mesh = disc_mesh(200);
  const auto law = make_isotropic(1.0, 1.0);
  const auto rep = run_probe(*mesh, law, Vector3d(0.3, 0.5, -1.0));
  const double c = 1.25 * rep.levels.front().rigidity.ratio;
  const double c1 = 1.25 * rep.levels.front().rigidity.scaled_distance;
  for (const auto& l : rep.levels) {
    EXPECT_LE(l.rigidity.deviation, c * l.h);
    EXPECT_LE(l.rigidity.scaled_distance, c1);
  }
}

TEST(Probe, InputChecks) {
  const auto mesh = disc_mesh(200);
  const auto law = make_isotropic(1.0, 1.0);
  ProbeOptions o;
  o.max_unknowns = 1000;
  try {
    run_probe(*mesh, law, Vector3d(0, 0, 1), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::size);
  }
  o = {};
  o.ladder = {0.1, 0.0};
  EXPECT_THROW(run_probe(*mesh, law, Vector3d(0, 0, 1), o), Error);
  const auto g = grid(0.1);
  EXPECT_THROW(build_recovery(FrameCurve::constant(1.0, 5), {}, nullptr, g), Error);
  EXPECT_THROW(approximate_strain(Field3D(g), std::vector<Matrix3d>(3)), Error);
}
