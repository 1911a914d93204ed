#pragma once

// Numerical probes of the dimension reduction on Omega = [0, L] x omega:
// tensor-grid fields, the Griso decomposition, approximate strains,
// recovery sequences and the scaled 3D energy.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rodhom/cross_section.hpp"
#include "rodhom/effective_stiffness.hpp"
#include "rodhom/error.hpp"
#include "rodhom/fem2d.hpp"
#include "rodhom/material.hpp"
#include "rodhom/rod_model.hpp"
#include "rodhom/so3.hpp"

namespace rodhom {

/// Nodes x1_j = j L / cells times the vertices of a normalized section.
class TensorGrid {
 public:
  TensorGrid(std::shared_ptr<const TriMesh2D> mesh, double length, int cells, double h)
      : mesh_(mesh ? std::move(mesh) : throw Error(ErrorCode::invalid_input, "tensor grid needs a section mesh")),
        length_(length),
        cells_(cells),
        h_(h),
        geo_(*mesh_) {
    if (!(length > 0)) throw Error(ErrorCode::invalid_parameter, "rod length must be positive");
    if (cells < 1) throw Error(ErrorCode::invalid_parameter, "tensor grid needs at least one cell");
    if (!(h > 0 && h <= 1)) throw Error(ErrorCode::invalid_parameter, "thickness h must lie in (0, 1]");
    weights_ = p1_integration_weights(*mesh_);
    mass_ = p1_mass(*mesh_);
  }

  TensorGrid(const TriMesh2D& mesh, double length, int cells, double h)
      : TensorGrid(std::make_shared<const TriMesh2D>(mesh), length, cells, h) {}

  const TriMesh2D& mesh() const { return *mesh_; }
  double length() const { return length_; }
  int cells() const { return cells_; }
  double h() const { return h_; }
  double dx() const { return length_ / cells_; }
  double x1(int j) const { return j * dx(); }
  std::size_t vertices() const { return mesh_->num_vertices(); }
  std::size_t triangles() const { return mesh_->num_triangles(); }
  std::size_t nodes() const { return vertices() * (cells_ + 1); }
  std::size_t cell_count() const { return triangles() * cells_; }
  std::size_t index(int j, std::size_t v) const { return j * vertices() + v; }
  const Vector2d& section_point(std::size_t v) const { return mesh_->vertices()[v]; }
  const P1Geometry& geometry() const { return geo_; }
  const VectorXd& weights() const { return weights_; }
  const SparseMatrix& mass() const { return mass_; }
  double cell_volume(std::size_t t) const { return mesh_->triangle_area(t) * dx(); }

 private:
  std::shared_ptr<const TriMesh2D> mesh_;
  double length_;
  int cells_;
  double h_;
  P1Geometry geo_;
  VectorXd weights_;
  SparseMatrix mass_;
};

/// Vector field with one value per grid node (displacement or deformation).
struct Field3D {
  std::shared_ptr<const TensorGrid> grid;
  std::vector<Vector3d> values;

  explicit Field3D(std::shared_ptr<const TensorGrid> g)
      : grid(std::move(g)), values(grid->nodes(), Vector3d::Zero()) {}

  Vector3d& at(int j, std::size_t v) { return values[grid->index(j, v)]; }
  const Vector3d& at(int j, std::size_t v) const { return values[grid->index(j, v)]; }

  /// Field from a function of (x1, x2, x3).
  template <class Fn>
  static Field3D sample(std::shared_ptr<const TensorGrid> g, Fn&& fn) {
    Field3D f(g);
    for (int j = 0; j <= g->cells(); ++j) {
      for (std::size_t v = 0; v < g->vertices(); ++v) {
        const Vector2d& p = g->section_point(v);
        f.at(j, v) = fn(g->x1(j), p.x(), p.y());
      }
    }
    return f;
  }

  /// Scaled gradient (d1, d2 / h, d3 / h) at the centroid of prism (e, t).
  Matrix3d cell_gradient(int e, std::size_t t) const {
    const auto& tri = grid->mesh().triangles()[t];
    const auto& grads = grid->geometry().grads[t];
    Matrix3d g = Matrix3d::Zero();
    for (int i = 0; i < 3; ++i) {
      const Vector3d lo = at(e, tri[i]), hi = at(e + 1, tri[i]);
      g.col(0) += (hi - lo) / (3.0 * grid->dx());
      const Vector3d mid = 0.5 * (lo + hi);
      g.col(1) += grads[i].x() * mid / grid->h();
      g.col(2) += grads[i].y() * mid / grid->h();
    }
    return g;
  }

  /// Scaled gradient at the x1-midpoint of prism (e, t) and the midpoint of
  /// triangle edge (k, k + 1); d1 varies linearly over the section.
  Matrix3d edge_gradient(int e, std::size_t t, int k) const {
    const auto& tri = grid->mesh().triangles()[t];
    Matrix3d g = cell_gradient(e, t);
    g.col(0).setZero();
    for (int i : {k, (k + 1) % 3}) g.col(0) += (at(e + 1, tri[i]) - at(e, tri[i])) / (2.0 * grid->dx());
    return g;
  }

  /// Cell gradients ordered e * triangles + t.
  std::vector<Matrix3d> cell_gradients() const {
    std::vector<Matrix3d> out(grid->cell_count());
    for (int e = 0; e < grid->cells(); ++e) {
      for (std::size_t t = 0; t < grid->triangles(); ++t) out[e * grid->triangles() + t] = cell_gradient(e, t);
    }
    return out;
  }

  /// L2(Omega) norm by one-point prism quadrature of the centroid value.
  double l2_norm() const {
    double s = 0.0;
    for (int e = 0; e < grid->cells(); ++e) {
      for (std::size_t t = 0; t < grid->triangles(); ++t) {
        const auto& tri = grid->mesh().triangles()[t];
        Vector3d c = Vector3d::Zero();
        for (int i = 0; i < 3; ++i) c += (at(e, tri[i]) + at(e + 1, tri[i])) / 6.0;
        s += grid->cell_volume(t) * c.squaredNorm();
      }
    }
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, v.cwiseAbs().maxCoeff());
    return m;
  }
};

using Displacement3D = Field3D;

/// L2(Omega) norm of a per-cell matrix field.
inline double cell_l2_norm(const TensorGrid& g, const std::vector<Matrix3d>& f) {
  double s = 0.0;
  for (int e = 0; e < g.cells(); ++e) {
    for (std::size_t t = 0; t < g.triangles(); ++t) s += g.cell_volume(t) * f[e * g.triangles() + t].squaredNorm();
  }
  return std::sqrt(s);
}

inline double sym_strain_norm(const Field3D& u) {
  auto g = u.cell_gradients();
  for (auto& m : g) m = sym(m);
  return cell_l2_norm(*u.grid, g);
}

// ---------------------------------------------------------------------------
// Griso decomposition.

struct GrisoParts {
  Vector3d a = Vector3d::Zero();
  Matrix3d B = Matrix3d::Zero();
  VectorXd phi1, phi2, w;  ///< nodal values on the x1 grid
  Field3D z;
  std::vector<Vector3d> U, R;  ///< slice averages and first-moment rotations

  explicit GrisoParts(std::shared_ptr<const TensorGrid> g) : z(std::move(g)) {}
};

/// Elementary displacement U + R x (0, h x2, h x3) with slice average U and
/// R fixed by the first moments, followed by the lemma's a, B, phi, w, z.
inline GrisoParts griso_decompose(const Field3D& u) {
  const TensorGrid& g = *u.grid;
  const auto nv = static_cast<Eigen::Index>(g.vertices());
  const double h = g.h();
  const double area = g.weights().sum();
  VectorXd x2(nv), x3(nv);
  for (Eigen::Index v = 0; v < nv; ++v) {
    x2[v] = g.section_point(v).x();
    x3[v] = g.section_point(v).y();
  }
  const VectorXd mx2 = g.mass() * x2, mx3 = g.mass() * x3;
  const double mu2 = x2.dot(mx2), mu3 = x3.dot(mx3);

  GrisoParts p(u.grid);
  const int n = g.cells();
  p.U.resize(n + 1);
  p.R.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    Vector3d mean = Vector3d::Zero();
    double m2u1 = 0, m3u1 = 0, torsion = 0;
    for (Eigen::Index v = 0; v < nv; ++v) {
      const Vector3d& val = u.at(j, v);
      mean += g.weights()[v] * val;
      m2u1 += mx2[v] * val.x();
      m3u1 += mx3[v] * val.x();
      torsion += mx2[v] * val.z() - mx3[v] * val.y();
    }
    p.U[j] = mean / area;
    p.R[j] = Vector3d(torsion / (h * (mu2 + mu3)), m3u1 / (h * mu3), -m2u1 / (h * mu2));
  }

  p.a = p.U[0];
  p.B = hat(p.R[0]);
  // Trapezoidal primitives of R2, R3; any consistent rule keeps the identity exact.
  std::vector<double> int2(n + 1, 0.0), int3(n + 1, 0.0);
  for (int j = 0; j < n; ++j) {
    int2[j + 1] = int2[j] + 0.5 * g.dx() * (p.R[j].y() + p.R[j + 1].y());
    int3[j + 1] = int3[j] + 0.5 * g.dx() * (p.R[j].z() + p.R[j + 1].z());
  }
  p.phi1.resize(n + 1);
  p.phi2.resize(n + 1);
  p.w.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    const double x1 = g.x1(j);
    p.phi1[j] = h * (int3[j] - x1 * p.R[0].z());
    p.phi2[j] = h * (-int2[j] + x1 * p.R[0].y());
    p.w[j] = -h * (p.R[j].x() - p.R[0].x());
  }
  for (int j = 0; j <= n; ++j) {
    for (Eigen::Index v = 0; v < nv; ++v) {
      const Vector3d hx(0.0, h * x2[v], h * x3[v]);
      const Vector3d ubar = u.at(j, v) - p.U[j] - p.R[j].cross(hx);
      p.z.at(j, v) = Vector3d(p.U[j].x() - p.U[0].x() + ubar.x(),
                              p.U[j].y() - p.U[0].y() - int3[j] + ubar.y(),
                              p.U[j].z() - p.U[0].z() + int2[j] + ubar.z());
    }
  }
  return p;
}

/// Right-hand side of the decomposition identity, node by node. The
/// derivatives phi_alpha' are h (R3 - R3(0)) and -h (R2 - R2(0)).
inline Field3D griso_reconstruct(const GrisoParts& p) {
  const TensorGrid& g = *p.z.grid;
  const double h = g.h();
  Field3D out(p.z.grid);
  for (int j = 0; j <= g.cells(); ++j) {
    const double x1 = g.x1(j);
    const double dphi1 = h * (p.R[j].z() - p.R[0].z());
    const double dphi2 = -h * (p.R[j].y() - p.R[0].y());
    for (std::size_t v = 0; v < g.vertices(); ++v) {
      const double x2 = g.section_point(v).x(), x3 = g.section_point(v).y();
      out.at(j, v) = p.a + p.B * Vector3d(x1, h * x2, h * x3) +
                     Vector3d(-dphi1 * x2 - dphi2 * x3, p.phi1[j] / h + p.w[j] * x3,
                              p.phi2[j] / h - p.w[j] * x2) +
                     p.z.at(j, v);
    }
  }
  return out;
}

/// Largest node residual of the decomposition identity, relative to max |u|.
inline double griso_residual(const Field3D& u, const GrisoParts& p) {
  const Field3D r = griso_reconstruct(p);
  double worst = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    worst = std::max(worst, (r.values[i] - u.values[i]).cwiseAbs().maxCoeff());
  }
  return worst / std::max(1.0, u.max_abs());
}

namespace detail {

/// Discrete W^{k,2}(0, L) norm of nodal values (k = 1 or 2): trapezoid for
/// f, cell differences for f', node-centred second differences for f''.
inline double sobolev_norm(const VectorXd& f, double dx, int order) {
  const Eigen::Index n = f.size() - 1;
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    s += 0.5 * dx * (f[j] * f[j] + f[j + 1] * f[j + 1]);
    const double d = (f[j + 1] - f[j]) / dx;
    s += dx * d * d;
  }
  if (order >= 2) {
    for (Eigen::Index j = 1; j < n; ++j) {
      const double d2 = (f[j + 1] - 2 * f[j] + f[j - 1]) / (dx * dx);
      s += dx * d2 * d2;
    }
  }
  return std::sqrt(s);
}

}  // namespace detail

struct GrisoNorms {
  double strain = 0.0;  ///< |sym grad_h u|
  double rod = 0.0;     ///< |phi1|_{W2} + |phi2|_{W2} + |w|_{W1}
  double remainder = 0.0;  ///< (|z|^2 + |grad_h z|^2)^(1/2)
};

inline GrisoNorms griso_norms(const Field3D& u, const GrisoParts& p) {
  const TensorGrid& g = *u.grid;
  GrisoNorms n;
  n.strain = sym_strain_norm(u);
  n.rod = detail::sobolev_norm(p.phi1, g.dx(), 2) + detail::sobolev_norm(p.phi2, g.dx(), 2) +
          detail::sobolev_norm(p.w, g.dx(), 1);
  const double zg = cell_l2_norm(g, p.z.cell_gradients());
  const double zl = p.z.l2_norm();
  n.remainder = std::sqrt(zl * zl + zg * zg);
  return n;
}

/// Random smooth displacement: polynomial modes plus a bending/torsion part
/// u = (-f' x2 - g' x3, f / h + t x3, g / h - t x2) with random cubic f, g, t.
inline Field3D random_smooth_field(std::shared_ptr<const TensorGrid> g, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const double length = g->length(), h = g->h();
  std::array<std::array<double, 10>, 3> c;
  for (auto& row : c) {
    for (auto& v : row) v = nd(rng);
  }
  std::array<double, 4> f, gg, t;
  for (int k = 0; k < 4; ++k) {
    f[k] = nd(rng);
    gg[k] = nd(rng);
    t[k] = nd(rng);
  }
  const double mix = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  auto poly = [](const std::array<double, 4>& a, double s) { return a[0] + s * (a[1] + s * (a[2] + s * a[3])); };
  auto dpoly = [](const std::array<double, 4>& a, double s) { return a[1] + s * (2 * a[2] + 3 * s * a[3]); };
  return Field3D::sample(g, [&](double x1, double x2, double x3) {
    const double s = x1 / length;
    const std::array<double, 10> m{1, s, x2, x3, s * s, s * x2, s * x3, x2 * x2, x2 * x3, x3 * x3};
    Vector3d u;
    for (int i = 0; i < 3; ++i) {
      u[i] = 0.0;
      for (int k = 0; k < 10; ++k) u[i] += c[i][k] * m[k];
    }
    const Vector3d bend(-dpoly(f, s) / length * x2 - dpoly(gg, s) / length * x3,
                        poly(f, s) / h + poly(t, s) * x3, poly(gg, s) / h - poly(t, s) * x2);
    return Vector3d((1 - mix) * u + mix * bend);
  });
}

struct GrisoConstants {
  double rod = 0.0;
  double remainder = 0.0;
};

/// Constants of the two estimates, fitted as safety times the largest
/// observed ratio over a randomized sweep. Fields with vanishing strain
/// are skipped.
inline GrisoConstants fit_griso_constants(std::shared_ptr<const TensorGrid> g, int samples, std::uint64_t seed,
                                          double safety = 2.0) {
  if (samples < 1) throw Error(ErrorCode::invalid_parameter, "need at least one sample to fit constants");
  std::mt19937_64 rng(seed);
  GrisoConstants c;
  for (int k = 0; k < samples; ++k) {
    const Field3D u = random_smooth_field(g, rng);
    const auto n = griso_norms(u, griso_decompose(u));
    if (n.strain <= 1e-12 * std::max(1.0, u.max_abs())) continue;
    c.rod = std::max(c.rod, n.rod / n.strain);
    c.remainder = std::max(c.remainder, n.remainder / n.strain);
  }
  c.rod *= safety;
  c.remainder *= safety;
  return c;
}

// ---------------------------------------------------------------------------
// Strains, rotations, rigidity.

/// Rotation at the midpoint of each interval of a frame curve.
inline std::vector<Matrix3d> midpoint_rotations(const FrameCurve& frame) {
  std::vector<Matrix3d> out(frame.intervals());
  const auto& q = frame.nodes();
  for (int i = 0; i < frame.intervals(); ++i) {
    const Vector3d phi = quat_log(q[i].conjugate() * q[i + 1]);
    out[i] = (q[i] * quat_exp(0.5 * phi)).toRotationMatrix();
  }
  return out;
}

/// G = (Rh^T grad_h y - I) / h per cell, with Rh constant on each layer.
inline std::vector<Matrix3d> approximate_strain(const Field3D& y, const std::vector<Matrix3d>& rh) {
  const TensorGrid& g = *y.grid;
  if (static_cast<int>(rh.size()) != g.cells()) {
    throw Error(ErrorCode::invalid_input, "rotation field needs one rotation per cell layer");
  }
  std::vector<Matrix3d> out(g.cell_count());
  for (int e = 0; e < g.cells(); ++e) {
    for (std::size_t t = 0; t < g.triangles(); ++t) {
      out[e * g.triangles() + t] =
          (rh[e].transpose() * y.cell_gradient(e, t) - Matrix3d::Identity()) / g.h();
    }
  }
  return out;
}

inline std::vector<Matrix3d> approximate_strain(const Field3D& y, const FrameCurve& frame) {
  return approximate_strain(y, midpoint_rotations(frame));
}

/// Best-fit rotation per layer: polar factor of the layer-averaged gradient.
inline std::vector<Matrix3d> best_fit_rotations(const Field3D& y) {
  const TensorGrid& g = *y.grid;
  std::vector<Matrix3d> out(g.cells());
  for (int e = 0; e < g.cells(); ++e) {
    Matrix3d avg = Matrix3d::Zero();
    for (std::size_t t = 0; t < g.triangles(); ++t) avg += g.mesh().triangle_area(t) * y.cell_gradient(e, t);
    out[e] = nearest_rotation(avg);
  }
  return out;
}

struct RigidityDiagnostic {
  double scaled_distance = 0.0;  ///< (1/h^2) integral dist^2(grad_h y, SO(3))
  double deviation = 0.0;        ///< |grad_h y - Rh|_{L2} for best-fit Rh
  double ratio = 0.0;            ///< deviation / h
};

inline RigidityDiagnostic rigidity_diagnostic(const Field3D& y) {
  const TensorGrid& g = *y.grid;
  const auto rh = best_fit_rotations(y);
  RigidityDiagnostic d;
  double dev = 0.0;
  for (int e = 0; e < g.cells(); ++e) {
    for (std::size_t t = 0; t < g.triangles(); ++t) {
      const Matrix3d f = y.cell_gradient(e, t);
      d.scaled_distance += g.cell_volume(t) * dist2_so3(f);
      dev += g.cell_volume(t) * (f - rh[e]).squaredNorm();
    }
  }
  d.scaled_distance /= g.h() * g.h();
  d.deviation = std::sqrt(dev);
  d.ratio = d.deviation / g.h();
  return d;
}

// ---------------------------------------------------------------------------
// Recovery sequence and energy.

/// y = int_0^x1 R e1 + h x2 R e2 + h x3 R e3 + h R vbar
///     - h^2 (x2 (A vbar)_2 + x3 (A vbar)_3) R e1 + h int_0^x1 (a - (A vbar)_1) R e1
/// with vbar = h beta(x') the section corrector of m(A(x1), a(x1)) and
/// A = R^T R'. `a` holds one value per interval; an empty `a` means zero.
/// By default (A vbar)_1 in the last term is replaced by its section mean:
/// taken pointwise, its x2 and x3 derivatives leave an O(1) term
/// int_0^x1 d_alpha (A beta)_1 in G that does not vanish as h -> 0.
inline Field3D build_recovery(const FrameCurve& frame, const std::vector<double>& a,
                              const SectionCorrectors* correctors, std::shared_ptr<const TensorGrid> grid,
                              bool pointwise_stretch_correction = false) {
  const TensorGrid& g = *grid;
  const int n = g.cells();
  if (frame.intervals() != n || std::abs(frame.length() - g.length()) > 1e-12 * g.length()) {
    throw Error(ErrorCode::invalid_input, "frame curve and tensor grid disagree in N or L");
  }
  if (!a.empty() && static_cast<int>(a.size()) != n) {
    throw Error(ErrorCode::invalid_input, "stretch profile needs one value per interval");
  }
  const double h = g.h(), dx = g.dx();
  const auto nv = g.vertices();
  const StrainCurve strain = strain_of(frame);
  auto a_at = [&](int i) { return a.empty() ? 0.0 : a[i]; };

  // Nodal strain and stretch: mean of the adjacent intervals.
  std::vector<Vector3d> node_axial(n + 1);
  std::vector<double> node_a(n + 1);
  for (int j = 0; j <= n; ++j) {
    const int lo = std::max(0, j - 1), hi = std::min(n - 1, j);
    node_axial[j] = 0.5 * (strain.axial[lo] + strain.axial[hi]);
    node_a[j] = 0.5 * (a_at(lo) + a_at(hi));
  }

  std::vector<Matrix3d> r(n + 1);
  for (int j = 0; j <= n; ++j) r[j] = frame.rotation(j);

  // Centre line and stretch part, exact for piecewise-constant data:
  // integral over an interval of R_i exp(s hat(v)) e1 is dx R_i J_l(dx v) e1.
  std::vector<Vector3d> centre(n + 1, Vector3d::Zero()), stretch(n + 1, Vector3d::Zero());
  for (int i = 0; i < n; ++i) {
    const Vector3d step = dx * r[i] * left_jacobian(dx * strain.axial[i]).col(0);
    centre[i + 1] = centre[i] + step;
    stretch[i + 1] = stretch[i] + a_at(i) * step;
  }

  // vbar = h beta at each node; (A vbar)_1 integrated by the trapezoid rule.
  std::vector<VectorXd> vbar(n + 1);
  for (int j = 0; j <= n; ++j) {
    if (correctors) {
      const StrainLoad load{node_a[j], -node_axial[j].z(), node_axial[j].y(), -node_axial[j].x()};
      vbar[j] = h * correctors->combine(load);
    } else {
      vbar[j] = VectorXd::Zero(3 * static_cast<Eigen::Index>(nv));
    }
  }
  auto av = [&](int j, std::size_t v) {
    return Vector3d(hat(node_axial[j]) * vbar[j].segment<3>(3 * static_cast<Eigen::Index>(v)));
  };

  auto av1 = [&](int j, std::size_t v) {
    if (pointwise_stretch_correction) return av(j, v).x();
    double mean = 0.0;
    for (std::size_t k = 0; k < nv; ++k) mean += g.weights()[static_cast<Eigen::Index>(k)] * av(j, k).x();
    return mean / g.weights().sum();
  };

  Field3D y(grid);
  std::vector<Vector3d> correction(nv, Vector3d::Zero());
  for (int j = 0; j <= n; ++j) {
    if (j > 0) {
      for (std::size_t v = 0; v < nv; ++v) {
        correction[v] -= 0.5 * dx * (av1(j - 1, v) * r[j - 1].col(0) + av1(j, v) * r[j].col(0));
      }
    }
    for (std::size_t v = 0; v < nv; ++v) {
      const double x2 = g.section_point(v).x(), x3 = g.section_point(v).y();
      const Vector3d local = av(j, v);
      y.at(j, v) = centre[j] + h * x2 * r[j].col(1) + h * x3 * r[j].col(2) +
                   h * r[j] * vbar[j].segment<3>(3 * static_cast<Eigen::Index>(v)) -
                   h * h * (x2 * local.y() + x3 * local.z()) * r[j].col(0) + h * (stretch[j] + correction[v]);
    }
  }
  return y;
}

struct ProbeEnergy {
  double value = 0.0;  ///< (1/h^2) integral W(x, grad_h y)
  std::vector<std::size_t> inverted_cells;
};

enum class ProbeQuadrature {
  centroid,       ///< one point per prism
  edge_midpoint,  ///< three section edge midpoints at the x1-midpoint
};

/// Tensor-product quadrature of the scaled energy. The edge-midpoint rule
/// matches the one used for the section correctors, so the h -> 0 limit of
/// a recovery sequence is the discrete Q0 itself; the centroid rule drops
/// the in-triangle variance of the macro strain, an O(mesh^2) bias.
inline ProbeEnergy probe_energy(const Field3D& y, const NonlinearLaw& law,
                                ProbeQuadrature rule = ProbeQuadrature::edge_midpoint) {
  const TensorGrid& g = *y.grid;
  const auto& p = g.mesh().vertices();
  ProbeEnergy out;
  for (int e = 0; e < g.cells(); ++e) {
    const double x1 = (e + 0.5) * g.dx();
    for (std::size_t t = 0; t < g.triangles(); ++t) {
      bool inverted = false;
      if (rule == ProbeQuadrature::centroid) {
        const Matrix3d f = y.cell_gradient(e, t);
        inverted = f.determinant() <= 0;
        const Vector2d c = g.mesh().centroid_of(t);
        out.value += g.cell_volume(t) * law({x1, c.x(), c.y()}, f);
      } else {
        const auto& tri = g.mesh().triangles()[t];
        for (int k = 0; k < 3; ++k) {
          const Matrix3d f = y.edge_gradient(e, t, k);
          inverted = inverted || f.determinant() <= 0;
          const Vector2d q = 0.5 * (p[tri[k]] + p[tri[(k + 1) % 3]]);
          out.value += g.cell_volume(t) / 3.0 * law({x1, q.x(), q.y()}, f);
        }
      }
      if (inverted) out.inverted_cells.push_back(e * g.triangles() + t);
    }
  }
  out.value /= g.h() * g.h();
  return out;
}

// ---------------------------------------------------------------------------
// The ladder probe.

struct ProbeOptions {
  std::vector<double> ladder{0.2, 0.1, 0.05};
  double length = 1.0;
  int cells = 0;  ///< per level; 0 picks max(8, ceil(2 L / h))
  std::size_t max_unknowns = 1'000'000;
  double tol = 1e-10;
  unsigned threads = 0;
  ProbeQuadrature quadrature = ProbeQuadrature::edge_midpoint;
};

struct ProbeLevel {
  double h = 0.0;
  int cells = 0;
  std::size_t unknowns = 0;
  double energy = 0.0;
  double relative_gap = 0.0;  ///< |energy - target| / target
  std::size_t inverted_cells = 0;
  RigidityDiagnostic rigidity;
  double gradient_deviation = 0.0;  ///< max over cells |grad_h y - R|
  double strain_distance = 0.0;     ///< relative L2 distance of sym G to the limit strain
  double griso_residual = 0.0;
};

struct ProbeReport {
  Vector3d strain_axial = Vector3d::Zero();
  double a = 0.0;
  double target = 0.0;  ///< L Q0(A)
  std::vector<ProbeLevel> levels;
  double rigidity_constant = 0.0;  ///< largest deviation / h over the ladder

  bool gaps_decreasing() const {
    for (std::size_t i = 1; i < levels.size(); ++i) {
      if (!(levels[i].relative_gap < levels[i - 1].relative_gap)) return false;
    }
    return !levels.empty();
  }
  double min_energy_ratio() const {
    double m = 1e300;
    for (const auto& l : levels) m = std::min(m, l.energy / target);
    return m;
  }
};

namespace detail {

/// Relative L2 distance between sym G and a e1 x e1 + sym iota(A d) + sym corrector.
inline double limit_strain_distance(const std::vector<Matrix3d>& gk, const TensorGrid& g, const StrainLoad& load,
                                    const VectorXd& beta) {
  double num = 0.0, den = 0.0;
  for (int e = 0; e < g.cells(); ++e) {
    for (std::size_t t = 0; t < g.triangles(); ++t) {
      const auto& tri = g.mesh().triangles()[t];
      Matrix3d lim = Matrix3d::Zero();
      lim.col(0) = load.m(g.mesh().centroid_of(t));
      for (int i = 0; i < 3; ++i) {
        const Vector3d b = beta.segment<3>(3 * static_cast<Eigen::Index>(tri[i]));
        lim.col(1) += g.geometry().grads[t][i].x() * b;
        lim.col(2) += g.geometry().grads[t][i].y() * b;
      }
      const double vol = g.cell_volume(t);
      num += vol * (sym(gk[e * g.triangles() + t]) - sym(lim)).squaredNorm();
      den += vol * sym(lim).squaredNorm();
    }
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace detail

/// Recovery-sequence ladder for the constant strain hat(axial) with the
/// optimal stretch a_min(A); compares (1/h^2) int W^h with L Q0(A).
inline ProbeReport run_probe(const TriMesh2D& mesh, const NonlinearLaw& law, const Vector3d& axial,
                             const ProbeOptions& options = {}) {
  if (options.ladder.empty()) throw Error(ErrorCode::invalid_parameter, "empty h ladder");
  for (double h : options.ladder) {
    if (!(h > 0 && h <= 1)) throw Error(ErrorCode::invalid_parameter, "ladder values must lie in (0, 1]");
  }
  auto shared_mesh = std::make_shared<const TriMesh2D>(mesh);
  for (double h : options.ladder) {
    const int cells = options.cells > 0 ? options.cells
                                        : std::max(8, static_cast<int>(std::ceil(2.0 * options.length / h)));
    const std::size_t unknowns = 3 * mesh.num_vertices() * static_cast<std::size_t>(cells + 1);
    if (unknowns > options.max_unknowns) {
      throw Error(ErrorCode::size, "probe level h = " + std::to_string(h) + " needs " + std::to_string(unknowns) +
                                       " unknowns, above the limit of " + std::to_string(options.max_unknowns));
    }
  }

  SectionCorrectors correctors;
  const auto stiff = effective_matrix(mesh, law.quadratic(), {options.tol, options.threads}, &correctors);
  ProbeReport rep;
  rep.strain_axial = axial;
  const Vector3d coords = skew_coords(axial);
  rep.a = a_min_eval(stiff, coords);
  rep.target = options.length * q0_eval(stiff, coords);
  const StrainLoad load{rep.a, coords[0], coords[1], coords[2]};
  const VectorXd beta = correctors.combine(load);

  for (double h : options.ladder) {
    const int cells = options.cells > 0 ? options.cells
                                        : std::max(8, static_cast<int>(std::ceil(2.0 * options.length / h)));
    auto grid = std::make_shared<const TensorGrid>(shared_mesh, options.length, cells, h);
    const FrameCurve frame = frame_reconstruct(StrainCurve::constant(options.length, cells, axial));
    const Field3D y = build_recovery(frame, std::vector<double>(cells, rep.a), &correctors, grid);

    ProbeLevel lvl;
    lvl.h = h;
    lvl.cells = cells;
    lvl.unknowns = 3 * grid->nodes();
    const auto pe = probe_energy(y, law, options.quadrature);
    lvl.energy = pe.value;
    lvl.inverted_cells = pe.inverted_cells.size();
    lvl.relative_gap = rep.target > 0 ? std::abs(pe.value - rep.target) / rep.target : std::abs(pe.value);
    lvl.rigidity = rigidity_diagnostic(y);
    const auto rmid = midpoint_rotations(frame);
    for (int e = 0; e < cells; ++e) {
      for (std::size_t t = 0; t < grid->triangles(); ++t) {
        lvl.gradient_deviation = std::max(lvl.gradient_deviation, (y.cell_gradient(e, t) - rmid[e]).norm());
      }
    }
    lvl.strain_distance = detail::limit_strain_distance(approximate_strain(y, rmid), *grid, load, beta);
    Field3D u(grid);
    const Field3D rest = Field3D::sample(grid, [h](double x1, double x2, double x3) {
      return Vector3d(x1, h * x2, h * x3);
    });
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = y.values[i] - rest.values[i];
    lvl.griso_residual = griso_residual(u, griso_decompose(u));
    rep.rigidity_constant = std::max(rep.rigidity_constant, lvl.rigidity.ratio);
    rep.levels.push_back(lvl);
  }
  return rep;
}

}  // namespace rodhom
