#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rodhom/cross_section.hpp"

using namespace rodhom;

namespace {

TriMesh2D from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_mesh(in);
}

double first_moment_norm(const TriMesh2D& m) {
  const auto s = section_moments(m);
  return s.first.norm();
}

}  // namespace

TEST(Primitive, RectangleAreaExact) {
  const auto m = build_primitive(PrimitiveKind::rectangle, {1.0, 1.0}, 2048);
  EXPECT_NEAR(m.area(), 1.0, 1e-13);
  EXPECT_GE(m.num_triangles(), 1000u);
}

TEST(Primitive, DiscAreaMatchesInscribedPolygon) {
  const auto m = build_primitive(PrimitiveKind::disc, {1.0}, 10000);
  const auto b = m.boundary_vertices();
  const double n = static_cast<double>(b.size());
  EXPECT_NEAR(m.area(), 0.5 * n * std::sin(2 * M_PI / n), 1e-12);
  EXPECT_NEAR(m.area(), M_PI, 1e-3 * M_PI);
}

TEST(Primitive, EllipseAreaIsAffineImageOfDisc) {
  const auto disc = build_primitive(PrimitiveKind::disc, {1.0}, 10000);
  const auto m = build_primitive(PrimitiveKind::ellipse, {2.0, 1.0}, 10000);
  EXPECT_NEAR(m.area(), 2.0 * disc.area(), 1e-12);
  EXPECT_NEAR(m.area(), 2 * M_PI, 1e-3 * 2 * M_PI);
}

TEST(Primitive, AnnulusAndLShapeAreas) {
  const auto a = build_primitive(PrimitiveKind::annulus, {0.5, 1.0}, 4000);
  EXPECT_NEAR(a.area(), M_PI * 0.75, 0.01 * M_PI * 0.75);
  const auto l = build_primitive(PrimitiveKind::l_shape, {1.0, 0.25}, 2000);
  EXPECT_NEAR(l.area(), 0.25 + 0.75 * 0.25, 1e-13);
}

TEST(Primitive, RejectsBadParameters) {
  EXPECT_THROW(build_primitive(PrimitiveKind::disc, {-1.0}, 100), Error);
  EXPECT_THROW(build_primitive(PrimitiveKind::rectangle, {1.0, 0.0}, 100), Error);
  EXPECT_THROW(build_primitive(PrimitiveKind::disc, {1.0}, 4), Error);
  EXPECT_THROW(build_primitive(PrimitiveKind::annulus, {1.5, 1.0}, 100), Error);
  try {
    build_primitive(PrimitiveKind::disc, {0.0}, 100);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_parameter);
  }
}

TEST(MeshFile, SingleTriangle) {
  const auto m = from_text("3 1\n0 0\n1 0\n0 1\n0 1 2\n");
  EXPECT_DOUBLE_EQ(m.area(), 0.5);
}

TEST(MeshFile, ClockwiseIsReoriented) {
  const auto m = from_text("3 1\n0 0\n1 0\n0 1\n0 2 1\n");
  EXPECT_DOUBLE_EQ(m.area(), 0.5);
  const auto& t = m.triangles()[0];
  const auto& p = m.vertices();
  EXPECT_GT(detail::signed_area(p[t[0]], p[t[1]], p[t[2]]), 0.0);
}

TEST(MeshFile, IndexOutOfRange) {
  try {
    from_text("3 1\n0 0\n1 0\n0 1\n0 1 7\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::mesh_invalid);
  }
}

TEST(MeshFile, ParseErrorCarriesLine) {
  try {
    from_text("3 1\n0 0\n1 zero\n0 1\n0 1 2\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::format);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(MeshFile, RejectsDisconnectedAndDuplicates) {
  EXPECT_THROW(from_text("6 2\n0 0\n1 0\n0 1\n5 5\n6 5\n5 6\n0 1 2\n3 4 5\n"), Error);
  EXPECT_THROW(from_text("4 1\n0 0\n1 0\n0 1\n0 0\n0 1 2\n"), Error);
  EXPECT_THROW(from_text("3 1\n0 0\n1 0\n2 0\n0 1 2\n"), Error);
}

TEST(MeshFile, MissingFile) {
  try {
    load_mesh("/nonexistent/path.mesh");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::mesh_not_found);
  }
}

TEST(MeshFile, WriteReadRoundTrip) {
  const auto m = build_primitive(PrimitiveKind::ellipse, {1.5, 1.0}, 200);
  std::stringstream s;
  write_mesh(s, m);
  const auto r = parse_mesh(s);
  ASSERT_EQ(r.num_vertices(), m.num_vertices());
  ASSERT_EQ(r.num_triangles(), m.num_triangles());
  EXPECT_NEAR(r.area(), m.area(), 1e-14);
}

TEST(Normalize, CenteredSquareIsIdentity) {
  const auto sq = build_primitive(PrimitiveKind::rectangle, {1.0, 1.0}, 512);
  const auto [m, g] = normalize_axes(sq);
  EXPECT_NEAR(g.translation.norm(), 0.0, 1e-14);
  EXPECT_EQ(g.rotation_angle, 0.0);
  EXPECT_NEAR(g.mu2, 1.0 / 12.0, 1e-14);
  EXPECT_NEAR(g.mu3, 1.0 / 12.0, 1e-14);
}

TEST(Normalize, ShiftedSquare) {
  const auto sq = build_primitive(PrimitiveKind::rectangle, {1.0, 1.0}, 512)
                      .transformed({0.5, 0.5}, 0.0);
  const auto [m, g] = normalize_axes(sq);
  EXPECT_NEAR(g.translation.x(), -0.5, 1e-13);
  EXPECT_NEAR(g.translation.y(), -0.5, 1e-13);
  EXPECT_NEAR(g.mu2, 1.0 / 12.0, 1e-14);
  EXPECT_NEAR(g.mu3, 1.0 / 12.0, 1e-14);
}

TEST(Normalize, DiscMoments) {
  const auto [m, g] = normalize_axes(build_primitive(PrimitiveKind::disc, {1.0}, 10000));
  EXPECT_NEAR(g.mu2, M_PI / 4, 1e-3 * M_PI / 4);
  EXPECT_NEAR(g.mu3, M_PI / 4, 1e-3 * M_PI / 4);
}

TEST(Normalize, RotatedRectangleRecoversPrincipalAxes) {
  const auto r = build_primitive(PrimitiveKind::rectangle, {2.0, 1.0}, 800)
                     .transformed({0.3, -1.2}, 0.7);
  const auto [m, g] = normalize_axes(r);
  const auto s = section_moments(m);
  const double tol = 1e-10 * m.area() * m.diameter() * m.diameter();
  EXPECT_LE(s.first.norm(), tol);
  EXPECT_LE(std::abs(s.xy), tol);
  EXPECT_NEAR(g.mu2, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(g.mu3, 1.0 / 6.0, 1e-12);
  EXPECT_GE(g.mu2, g.mu3);
  EXPECT_GT(g.rotation_angle, -M_PI / 2);
  EXPECT_LE(g.rotation_angle, M_PI / 2);
}

TEST(Normalize, Idempotent) {
  const auto r = build_primitive(PrimitiveKind::l_shape, {1.0, 0.3}, 1000).transformed({2.0, 1.0}, 0.4);
  const auto [m1, g1] = normalize_axes(r);
  const auto [m2, g2] = normalize_axes(m1);
  EXPECT_LE(g2.translation.norm(), 1e-12);
  EXPECT_LE(std::abs(g2.rotation_angle), 1e-12);
  EXPECT_NEAR(g2.mu2, g1.mu2, 1e-12);
  EXPECT_NEAR(g2.mu3, g1.mu3, 1e-12);
}

TEST(Normalize, TranslationInvariantMoments) {
  const auto base = build_primitive(PrimitiveKind::ellipse, {1.3, 0.7}, 2000);
  const auto g0 = normalize_axes(base).second;
  for (const Vector2d& t : {Vector2d(1.0, 0.0), Vector2d(-3.0, 2.5), Vector2d(0.1, -7.0)}) {
    const auto g = normalize_axes(base.transformed(t, 0.0)).second;
    EXPECT_NEAR(g.mu2, g0.mu2, 1e-12);
    EXPECT_NEAR(g.mu3, g0.mu3, 1e-12);
  }
}

TEST(Normalize, PolarMomentAdditivity) {
  const auto m = build_primitive(PrimitiveKind::annulus, {0.4, 1.0}, 3000).transformed({0.2, 0.1}, 0.0);
  const auto [n, g] = normalize_axes(m);
  const auto s = section_moments(n);
  EXPECT_NEAR(g.mu2 + g.mu3, s.xx + s.yy, 1e-12);
  EXPECT_LE(first_moment_norm(n), 1e-12);
}

TEST(Normalize, ThinTriangleWarns) {
  const auto m = from_text("3 1\n0 0\n1 0\n0.5 0.01\n0 1 2\n");
  EXPECT_FALSE(m.warnings().empty());
  const auto good = build_primitive(PrimitiveKind::rectangle, {1.0, 1.0}, 200);
  EXPECT_TRUE(good.warnings().empty());
}

TEST(DOmega, Definition) {
  EXPECT_EQ(d_omega({0.0, 0.0}), Vector3d(0, 0, 0));
  EXPECT_EQ(d_omega({1.0, 0.0}), Vector3d(0, 1, 0));
  EXPECT_EQ(d_omega({0.3, -0.7}), Vector3d(0, 0.3, -0.7));
}
