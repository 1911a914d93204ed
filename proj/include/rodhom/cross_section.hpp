#pragma once

// Triangulated rod cross-sections: construction, validation, ASCII I/O and
// normalization to centroidal principal axes.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rodhom/error.hpp"

namespace rodhom {

using Eigen::Vector2d;
using Eigen::Vector3d;
using Triangle = std::array<int, 3>;

/// A consistently oriented, connected P1 triangulation of the cross-section.
///
/// Instances can only be obtained through `create`, which reorients clockwise
/// triangles and rejects anything that violates the mesh invariants, so every
/// TriMesh2D in circulation is valid.
class TriMesh2D {
 public:
  static constexpr double kDuplicateTolerance = 1e-12;
  static constexpr double kMinAngleWarningDeg = 20.0;

  static TriMesh2D create(std::vector<Vector2d> vertices,
                          std::vector<Triangle> triangles);

  const std::vector<Vector2d>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }

  double triangle_area(std::size_t t) const { return areas_[t]; }
  const std::vector<double>& triangle_areas() const { return areas_; }
  double area() const {
    return std::accumulate(areas_.begin(), areas_.end(), 0.0);
  }

  Vector2d centroid_of(std::size_t t) const {
    const auto& tri = triangles_[t];
    return (vertices_[tri[0]] + vertices_[tri[1]] + vertices_[tri[2]]) / 3.0;
  }

  /// Smallest interior angle over all triangles, in degrees.
  double min_angle_deg() const;

  /// Largest distance between two boundary vertices.
  double diameter() const;

  /// Vertex indices on the boundary (edges used by exactly one triangle).
  std::vector<int> boundary_vertices() const;

  /// Non-fatal quality notes (currently: minimum angle below 20 degrees).
  std::vector<std::string> warnings() const;

  /// Applies x -> rotation * (x + shift) to every vertex.
  TriMesh2D transformed(const Vector2d& shift, double angle) const;

 private:
  TriMesh2D() = default;
  void validate_and_orient();

  std::vector<Vector2d> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<double> areas_;
};

/// Geometric data of a normalized section. `translation` and
/// `rotation_angle` describe the rigid map x' = Rot(-angle) (x + translation)
/// from input coordinates to the normalized frame.
struct SectionGeometry {
  Vector2d translation = Vector2d::Zero();
  double rotation_angle = 0.0;
  double area = 0.0;
  double mu2 = 0.0;  ///< integral of x2^2 over the normalized section
  double mu3 = 0.0;  ///< integral of x3^2 over the normalized section
  double torsion_constant = 0.0;  ///< 0 until filled by fem2d
  double diameter = 0.0;
};

/// Exact area moments up to order two.
struct SectionMoments {
  double area = 0.0;
  Vector2d first = Vector2d::Zero();  ///< (int x2, int x3)
  double xx = 0.0;                    ///< int x2^2
  double yy = 0.0;                    ///< int x3^2
  double xy = 0.0;                    ///< int x2 x3
};

enum class PrimitiveKind { disc, rectangle, ellipse, annulus, l_shape };

namespace detail {

inline double signed_area(const Vector2d& a, const Vector2d& b,
                          const Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                (b.y() - a.y()) * (c.x() - a.x()));
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

inline std::unordered_map<std::uint64_t, std::vector<int>> edge_map(
    const std::vector<Triangle>& triangles) {
  std::unordered_map<std::uint64_t, std::vector<int>> edges;
  edges.reserve(triangles.size() * 2);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (int k = 0; k < 3; ++k) {
      edges[edge_key(tri[k], tri[(k + 1) % 3])].push_back(static_cast<int>(t));
    }
  }
  return edges;
}

}  // namespace detail

inline TriMesh2D TriMesh2D::create(std::vector<Vector2d> vertices,
                                   std::vector<Triangle> triangles) {
  TriMesh2D mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.triangles_ = std::move(triangles);
  mesh.validate_and_orient();
  return mesh;
}

inline void TriMesh2D::validate_and_orient() {
  const int nv = static_cast<int>(vertices_.size());
  if (nv < 3 || triangles_.empty()) {
    throw Error(ErrorCode::mesh_invalid, "mesh needs at least 3 vertices and 1 triangle");
  }
  for (const auto& v : vertices_) {
    if (!std::isfinite(v.x()) || !std::isfinite(v.y())) {
      throw Error(ErrorCode::mesh_invalid, "non-finite vertex coordinate");
    }
  }
  std::vector<char> used(vertices_.size(), 0);
  areas_.resize(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    auto& tri = triangles_[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv) {
        throw Error(ErrorCode::mesh_invalid,
                    "triangle " + std::to_string(t) + " references vertex " +
                        std::to_string(tri[k]) + " but mesh has " +
                        std::to_string(nv) + " vertices");
      }
      used[tri[k]] = 1;
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw Error(ErrorCode::mesh_invalid,
                  "triangle " + std::to_string(t) + " repeats a vertex");
    }
    double a = detail::signed_area(vertices_[tri[0]], vertices_[tri[1]],
                                   vertices_[tri[2]]);
    if (a < 0) {
      std::swap(tri[1], tri[2]);
      a = -a;
    }
    const double scale = (vertices_[tri[1]] - vertices_[tri[0]]).squaredNorm() +
                         (vertices_[tri[2]] - vertices_[tri[0]]).squaredNorm();
    if (!(a > 1e-14 * scale)) {
      throw Error(ErrorCode::mesh_invalid,
                  "triangle " + std::to_string(t) + " is degenerate");
    }
    areas_[t] = a;
  }
  for (int v = 0; v < nv; ++v) {
    if (!used[v]) {
      throw Error(ErrorCode::mesh_invalid,
                  "vertex " + std::to_string(v) + " is not used by any triangle");
    }
  }

  // Duplicate vertices: sweep over x-sorted order.
  std::vector<int> order(vertices_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return vertices_[a].x() < vertices_[b].x();
  });
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const auto& p = vertices_[order[i]];
      const auto& q = vertices_[order[j]];
      if (q.x() - p.x() > kDuplicateTolerance) break;
      if (std::abs(q.y() - p.y()) <= kDuplicateTolerance) {
        throw Error(ErrorCode::mesh_invalid,
                    "duplicate vertices " + std::to_string(order[i]) + " and " +
                        std::to_string(order[j]));
      }
    }
  }

  // Connectivity through shared edges; also rejects non-manifold edges.
  detail::UnionFind components(triangles_.size());
  for (const auto& [key, tris] : detail::edge_map(triangles_)) {
    if (tris.size() > 2) {
      throw Error(ErrorCode::mesh_invalid, "edge shared by more than two triangles");
    }
    if (tris.size() == 2) components.unite(tris[0], tris[1]);
  }
  const int root = components.find(0);
  for (std::size_t t = 1; t < triangles_.size(); ++t) {
    if (components.find(static_cast<int>(t)) != root) {
      throw Error(ErrorCode::mesh_invalid, "mesh is not connected");
    }
  }
}

inline double TriMesh2D::min_angle_deg() const {
  double min_angle = 180.0;
  for (const auto& tri : triangles_) {
    for (int k = 0; k < 3; ++k) {
      const Vector2d a = vertices_[tri[(k + 1) % 3]] - vertices_[tri[k]];
      const Vector2d b = vertices_[tri[(k + 2) % 3]] - vertices_[tri[k]];
      const double c = a.dot(b) / (a.norm() * b.norm());
      min_angle = std::min(min_angle, std::acos(std::clamp(c, -1.0, 1.0)));
    }
  }
  return min_angle * 180.0 / std::numbers::pi;
}

inline std::vector<int> TriMesh2D::boundary_vertices() const {
  std::vector<char> on_boundary(vertices_.size(), 0);
  for (const auto& [key, tris] : detail::edge_map(triangles_)) {
    if (tris.size() == 1) {
      on_boundary[static_cast<int>(key >> 32)] = 1;
      on_boundary[static_cast<int>(key & 0xffffffffu)] = 1;
    }
  }
  std::vector<int> out;
  for (std::size_t v = 0; v < vertices_.size(); ++v) {
    if (on_boundary[v]) out.push_back(static_cast<int>(v));
  }
  return out;
}

inline double TriMesh2D::diameter() const {
  const auto boundary = boundary_vertices();
  double d2 = 0.0;
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    for (std::size_t j = i + 1; j < boundary.size(); ++j) {
      d2 = std::max(d2, (vertices_[boundary[i]] - vertices_[boundary[j]]).squaredNorm());
    }
  }
  return std::sqrt(d2);
}

inline std::vector<std::string> TriMesh2D::warnings() const {
  std::vector<std::string> out;
  const double angle = min_angle_deg();
  if (angle < kMinAngleWarningDeg) {
    std::ostringstream os;
    os << "minimum triangle angle " << angle << " deg is below "
       << kMinAngleWarningDeg << " deg";
    out.push_back(os.str());
  }
  return out;
}

inline TriMesh2D TriMesh2D::transformed(const Vector2d& shift, double angle) const {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<Vector2d> moved;
  moved.reserve(vertices_.size());
  for (const auto& v : vertices_) {
    const Vector2d p = v + shift;
    moved.emplace_back(c * p.x() - s * p.y(), s * p.x() + c * p.y());
  }
  return create(std::move(moved), triangles_);
}

/// Area moments by the three-point edge-midpoint rule, which integrates the
/// quadratic monomials exactly on each triangle.
/// With a shift, the moments are those of x + shift.
inline SectionMoments section_moments(const TriMesh2D& mesh,
                                      const Vector2d& shift = Vector2d::Zero()) {
  SectionMoments m;
  const auto& p = mesh.vertices();
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double w = mesh.triangle_area(t) / 3.0;
    for (int k = 0; k < 3; ++k) {
      const Vector2d q = 0.5 * (p[tri[k]] + p[tri[(k + 1) % 3]]) + shift;
      m.area += w;
      m.first += w * q;
      m.xx += w * q.x() * q.x();
      m.yy += w * q.y() * q.y();
      m.xy += w * q.x() * q.y();
    }
  }
  return m;
}

/// Moves the centroid to the origin and rotates onto principal axes with
/// mu2 >= mu3. Sections whose second-moment matrix is (numerically)
/// isotropic are only translated.
inline std::pair<TriMesh2D, SectionGeometry> normalize_axes(const TriMesh2D& mesh) {
  const SectionMoments raw = section_moments(mesh);
  if (!(raw.area > 0)) {
    throw Error(ErrorCode::mesh_invalid, "section has non-positive area");
  }
  // Central moments are taken about the centroid directly; subtracting
  // area * c^2 from raw moments loses digits for off-centre meshes.
  Vector2d centroid = raw.first / raw.area;
  SectionMoments central = section_moments(mesh, -centroid);
  centroid += central.first / raw.area;
  central = section_moments(mesh, -centroid);
  const double ixx = central.xx, iyy = central.yy, ixy = central.xy;

  double angle = 0.0;
  const double spread = std::hypot(ixx - iyy, 2.0 * ixy);
  if (spread > 1e-10 * (ixx + iyy)) {
    angle = 0.5 * std::atan2(2.0 * ixy, ixx - iyy);
  }

  SectionGeometry geometry;
  geometry.translation = -centroid;
  geometry.rotation_angle = angle;
  TriMesh2D normalized = mesh.transformed(-centroid, -angle);
  const SectionMoments m = section_moments(normalized);
  geometry.area = m.area;
  geometry.mu2 = m.xx;
  geometry.mu3 = m.yy;
  geometry.diameter = normalized.diameter();
  return {std::move(normalized), geometry};
}

/// The in-plane position vector (0, x2, x3).
inline Vector3d d_omega(const Vector2d& point) {
  return {0.0, point.x(), point.y()};
}

namespace detail {

// Zips two closed rings of vertex indices (inner may be a single centre
// vertex) into a band of triangles, advancing by normalized angle.
inline void zip_rings(const std::vector<int>& inner, const std::vector<int>& outer,
                      std::vector<Triangle>& out) {
  const std::size_t ni = inner.size(), no = outer.size();
  if (ni == 1) {
    for (std::size_t j = 0; j < no; ++j) {
      out.push_back({inner[0], outer[j], outer[(j + 1) % no]});
    }
    return;
  }
  std::size_t i = 0, j = 0;
  while (i < ni || j < no) {
    const bool advance_outer =
        i == ni || (j < no && static_cast<double>(j + 1) / no <=
                                  static_cast<double>(i + 1) / ni);
    if (advance_outer) {
      out.push_back({inner[i % ni], outer[j], outer[(j + 1) % no]});
      ++j;
    } else {
      out.push_back({inner[i], outer[j % no], inner[(i + 1) % ni]});
      ++i;
    }
  }
}

inline TriMesh2D unit_disc(int rings) {
  std::vector<Vector2d> verts{Vector2d::Zero()};
  std::vector<Triangle> tris;
  std::vector<int> previous{0};
  for (int k = 1; k <= rings; ++k) {
    const int count = 6 * k;
    const double r = static_cast<double>(k) / rings;
    std::vector<int> ring;
    for (int j = 0; j < count; ++j) {
      const double theta = 2.0 * std::numbers::pi * j / count;
      ring.push_back(static_cast<int>(verts.size()));
      verts.emplace_back(r * std::cos(theta), r * std::sin(theta));
    }
    zip_rings(previous, ring, tris);
    previous = std::move(ring);
  }
  return TriMesh2D::create(std::move(verts), std::move(tris));
}

// Structured grid on [x-lines] x [y-lines]; `keep(cx, cy)` selects cells.
template <class Keep>
TriMesh2D tensor_grid(const std::vector<double>& xs, const std::vector<double>& ys,
                      Keep keep) {
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;
  std::vector<int> index((nx + 1) * (ny + 1), -1);
  std::vector<Vector2d> verts;
  std::vector<Triangle> tris;
  auto vid = [&](int i, int j) {
    int& slot = index[j * (nx + 1) + i];
    if (slot < 0) {
      slot = static_cast<int>(verts.size());
      verts.emplace_back(xs[i], ys[j]);
    }
    return slot;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!keep(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]))) continue;
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1),
                d = vid(i, j + 1);
      if ((i + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
  return TriMesh2D::create(std::move(verts), std::move(tris));
}

inline std::vector<double> linspace(double a, double b, int cells) {
  std::vector<double> out(cells + 1);
  for (int i = 0; i <= cells; ++i) out[i] = a + (b - a) * i / cells;
  out.back() = b;
  return out;
}

}  // namespace detail

/// Builds a triangulated primitive with roughly `resolution` triangles.
///
/// Parameters per kind:
///   disc      {radius}
///   rectangle {width, height}        centred at the origin
///   ellipse   {semi_axis_2, semi_axis_3}
///   annulus   {inner_radius, outer_radius}
///   l_shape   {outer_side, arm_thickness}   [0,a]x[0,t] u [0,t]x[0,a]
inline TriMesh2D build_primitive(PrimitiveKind kind, const std::vector<double>& params,
                                 int resolution) {
  const std::size_t expected = kind == PrimitiveKind::disc ? 1 : 2;
  if (params.size() != expected) {
    throw Error(ErrorCode::invalid_parameter,
                "primitive expects " + std::to_string(expected) + " dimension(s)");
  }
  for (double p : params) {
    if (!(p > 0) || !std::isfinite(p)) {
      throw Error(ErrorCode::invalid_parameter, "primitive dimensions must be positive");
    }
  }
  if (resolution < 8) {
    throw Error(ErrorCode::invalid_parameter, "resolution must be at least 8");
  }

  switch (kind) {
    case PrimitiveKind::disc:
    case PrimitiveKind::ellipse: {
      const int rings = std::max(2, static_cast<int>(std::lround(std::sqrt(resolution / 6.0))));
      TriMesh2D disc = detail::unit_disc(rings);
      const double sx = params[0];
      const double sy = kind == PrimitiveKind::disc ? params[0] : params[1];
      std::vector<Vector2d> verts;
      for (const auto& v : disc.vertices()) verts.emplace_back(sx * v.x(), sy * v.y());
      return TriMesh2D::create(std::move(verts), disc.triangles());
    }
    case PrimitiveKind::rectangle: {
      const double w = params[0], h = params[1];
      const int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(resolution * w / (2.0 * h)))));
      const int ny = std::max(1, static_cast<int>(std::lround(resolution / (2.0 * nx))));
      return detail::tensor_grid(detail::linspace(-w / 2, w / 2, nx),
                                 detail::linspace(-h / 2, h / 2, ny),
                                 [](double, double) { return true; });
    }
    case PrimitiveKind::annulus: {
      const double r0 = params[0], r1 = params[1];
      if (!(r0 < r1)) {
        throw Error(ErrorCode::invalid_parameter, "annulus needs inner radius < outer radius");
      }
      const double circumference = std::numbers::pi * (r0 + r1);
      const int nr = std::max(1, static_cast<int>(std::lround(
                                     std::sqrt(resolution * (r1 - r0) / (2.0 * circumference)))));
      const int nt = std::max(8, static_cast<int>(std::lround(resolution / (2.0 * nr))));
      std::vector<Vector2d> verts;
      std::vector<Triangle> tris;
      for (int i = 0; i <= nr; ++i) {
        const double r = r0 + (r1 - r0) * i / nr;
        for (int j = 0; j < nt; ++j) {
          const double theta = 2.0 * std::numbers::pi * j / nt;
          verts.emplace_back(r * std::cos(theta), r * std::sin(theta));
        }
      }
      for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nt; ++j) {
          const int a = i * nt + j, b = i * nt + (j + 1) % nt;
          const int c = (i + 1) * nt + (j + 1) % nt, d = (i + 1) * nt + j;
          tris.push_back({a, b, c});
          tris.push_back({a, c, d});
        }
      }
      return TriMesh2D::create(std::move(verts), std::move(tris));
    }
    case PrimitiveKind::l_shape: {
      const double a = params[0], t = params[1];
      if (!(t < a)) {
        throw Error(ErrorCode::invalid_parameter, "l_shape needs arm thickness < outer side");
      }
      const double area = 2.0 * a * t - t * t;
      const double cell = std::sqrt(area / (resolution / 2.0));
      const int n1 = std::max(1, static_cast<int>(std::ceil(t / cell)));
      const int n2 = std::max(1, static_cast<int>(std::ceil((a - t) / cell)));
      auto lines = detail::linspace(0.0, t, n1);
      const auto rest = detail::linspace(t, a, n2);
      lines.insert(lines.end(), rest.begin() + 1, rest.end());
      return detail::tensor_grid(lines, lines, [t](double cx, double cy) {
        return cx < t || cy < t;
      });
    }
  }
  throw Error(ErrorCode::invalid_parameter, "unknown primitive kind");
}

inline PrimitiveKind parse_primitive_kind(const std::string& name) {
  if (name == "disc") return PrimitiveKind::disc;
  if (name == "rectangle") return PrimitiveKind::rectangle;
  if (name == "ellipse") return PrimitiveKind::ellipse;
  if (name == "annulus") return PrimitiveKind::annulus;
  if (name == "L-shape" || name == "l_shape" || name == "l-shape") return PrimitiveKind::l_shape;
  throw Error(ErrorCode::invalid_parameter, "unknown primitive '" + name + "'");
}

/// Parses the ASCII mesh format: "nv nt", then nv lines "x2 x3", then nt
/// lines "i j k" with 0-based indices.
inline TriMesh2D parse_mesh(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto next_line = [&](const char* what) -> std::istringstream {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw Error(ErrorCode::format, "line " + std::to_string(line_no + 1) +
                                       ": unexpected end of file, expected " + what);
  };
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::format, "line " + std::to_string(line_no) + ": " + msg);
  };
  auto expect_end = [&](std::istringstream& ls) {
    std::string extra;
    if (ls >> extra) fail("unexpected trailing token '" + extra + "'");
  };

  long long nv = 0, nt = 0;
  {
    auto ls = next_line("header \"nv nt\"");
    if (!(ls >> nv >> nt) || nv <= 0 || nt <= 0) fail("expected positive counts \"nv nt\"");
    expect_end(ls);
  }
  std::vector<Vector2d> verts(static_cast<std::size_t>(nv));
  for (auto& v : verts) {
    auto ls = next_line("vertex line");
    double x = 0, y = 0;
    if (!(ls >> x >> y)) fail("expected vertex coordinates \"x2 x3\"");
    expect_end(ls);
    v = {x, y};
  }
  std::vector<Triangle> tris(static_cast<std::size_t>(nt));
  for (auto& tri : tris) {
    auto ls = next_line("triangle line");
    if (!(ls >> tri[0] >> tri[1] >> tri[2])) fail("expected vertex indices \"i j k\"");
    expect_end(ls);
  }
  return TriMesh2D::create(std::move(verts), std::move(tris));
}

inline TriMesh2D load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::mesh_not_found, "cannot open mesh file '" + path + "'");
  return parse_mesh(in);
}

inline void write_mesh(std::ostream& out, const TriMesh2D& mesh) {
  out.precision(17);
  out << mesh.num_vertices() << ' ' << mesh.num_triangles() << '\n';
  for (const auto& v : mesh.vertices()) out << v.x() << ' ' << v.y() << '\n';
  for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace rodhom
