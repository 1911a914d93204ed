#pragma once

// P1 finite elements on the cross-section and the Krylov machinery shared by
// every linear solve in the library.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "rodhom/cross_section.hpp"
#include "rodhom/error.hpp"

namespace rodhom {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

using ScalarField = std::vector<double>;
using VectorField2D = std::vector<Vector2d>;

/// Discontinuous P1 vector field: one value per triangle corner, in the
/// corner order of the mesh triangles.
using ElementField2D = std::vector<std::array<Vector2d, 3>>;

struct SolveResult {
  VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Orthogonal projector onto the complement of span(basis).
class DenseDeflation {
 public:
  DenseDeflation() = default;
  explicit DenseDeflation(const std::vector<VectorXd>& basis) {
    for (const auto& v : basis) {
      VectorXd q = v;
      for (const auto& p : q_) q -= p.dot(q) * p;
      for (const auto& p : q_) q -= p.dot(q) * p;
      const double n = q.norm();
      if (n > 1e-12 * v.norm() && n > 0) q_.push_back(q / n);
    }
  }

  void operator()(VectorXd& x) const {
    for (const auto& q : q_) x -= q.dot(x) * q;
  }

  /// Norm of the component of x inside span(basis).
  double component_norm(const VectorXd& x) const {
    double s = 0.0;
    for (const auto& q : q_) s += q.dot(x) * q.dot(x);
    return std::sqrt(s);
  }

  const std::vector<VectorXd>& basis() const { return q_; }

 private:
  std::vector<VectorXd> q_;
};

namespace detail {

/// Jacobi-preconditioned CG restricted to the range of `project`, which must
/// be an orthogonal projector commuting with nothing in particular: the
/// iteration solves P M P x = P b with x kept in range(P).
template <class Project>
SolveResult projected_cg(const SparseMatrix& matrix, const VectorXd& rhs,
                         const Project& project, double tol, int max_iterations) {
  const Eigen::Index n = rhs.size();
  VectorXd b = rhs;
  project(b);
  SolveResult result;
  result.x = VectorXd::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return result;

  VectorXd inv_diag = matrix.diagonal();
  for (Eigen::Index i = 0; i < n; ++i) {
    inv_diag[i] = inv_diag[i] > 0 ? 1.0 / inv_diag[i] : 1.0;
  }

  VectorXd& x = result.x;
  VectorXd r = b;
  VectorXd z(n), p(n), q(n);
  int total = 0;
  for (int restart = 0; restart < 4; ++restart) {
    z = inv_diag.cwiseProduct(r);
    project(z);
    p = z;
    double rz = r.dot(z);
    while (r.norm() > tol * bnorm) {
      if (total >= max_iterations) {
        throw Error(ErrorCode::convergence,
                    "conjugate gradient did not converge within " +
                        std::to_string(max_iterations) + " iterations (relative residual " +
                        std::to_string(r.norm() / bnorm) + ")");
      }
      q.noalias() = matrix * p;
      project(q);
      const double pq = p.dot(q);
      if (!(pq > 0)) {
        throw Error(ErrorCode::convergence, "matrix is not positive definite on the solve space");
      }
      const double alpha = rz / pq;
      x += alpha * p;
      r -= alpha * q;
      z = inv_diag.cwiseProduct(r);
      project(z);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
      ++total;
    }
    // The recursive residual drifts; confirm against the true one.
    r = b - matrix * x;
    project(r);
    if (r.norm() <= tol * bnorm) break;
  }
  result.iterations = total;
  result.relative_residual = r.norm() / bnorm;
  if (result.relative_residual > tol) {
    throw Error(ErrorCode::convergence, "conjugate gradient stagnated above tolerance");
  }
  return result;
}

}  // namespace detail

/// Symmetric positive semidefinite sparse matrix with a known null space.
class SparseSpd {
 public:
  SparseSpd(SparseMatrix matrix, std::vector<VectorXd> kernel_basis = {})
      : matrix_(std::move(matrix)), kernel_(std::move(kernel_basis)), deflation_(kernel_) {
    if (matrix_.rows() != matrix_.cols()) {
      throw Error(ErrorCode::invalid_input, "matrix must be square");
    }
    const double mnorm = matrix_.norm();
    for (const auto& v : kernel_) {
      if (v.size() != matrix_.rows()) {
        throw Error(ErrorCode::invalid_input, "kernel vector has wrong length");
      }
      if ((matrix_ * v).norm() > 1e-10 * mnorm * v.norm()) {
        throw Error(ErrorCode::invalid_input, "kernel vector is not annihilated by the matrix");
      }
    }
  }

  Eigen::Index dimension() const { return matrix_.rows(); }
  const SparseMatrix& matrix() const { return matrix_; }
  const std::vector<VectorXd>& kernel_basis() const { return kernel_; }
  const DenseDeflation& deflation() const { return deflation_; }

 private:
  SparseMatrix matrix_;
  std::vector<VectorXd> kernel_;
  DenseDeflation deflation_;
};

/// Solves M x = rhs on the orthogonal complement of the kernel. The result is
/// orthogonal to every kernel vector; the reported residual is measured
/// against the kernel-free part of rhs. Consistency is judged relative to
/// max(|rhs|, rhs_scale); assembled right-hand sides whose element
/// contributions nearly cancel pass their uncancelled size as rhs_scale.
inline SolveResult solve_spd(const SparseSpd& system, const VectorXd& rhs,
                             double tol = 1e-10, int max_iterations = -1,
                             double rhs_scale = 0.0) {
  if (rhs.size() != system.dimension()) {
    throw Error(ErrorCode::invalid_input, "right-hand side has wrong length");
  }
  if (!(tol > 0 && tol <= 1e-2)) {
    throw Error(ErrorCode::invalid_parameter, "solver tolerance must lie in (0, 1e-2]");
  }
  const double bnorm = std::max(rhs.norm(), rhs_scale);
  if (system.deflation().component_norm(rhs) > 1e-8 * bnorm) {
    throw Error(ErrorCode::consistency, "right-hand side is not orthogonal to the kernel");
  }
  if (max_iterations < 0) max_iterations = 20 * static_cast<int>(system.dimension());
  return detail::projected_cg(system.matrix(), rhs, system.deflation(), tol, max_iterations);
}

/// Per-triangle P1 data: areas and gradients of the barycentric basis.
struct P1Geometry {
  std::vector<double> areas;
  std::vector<std::array<Vector2d, 3>> grads;

  explicit P1Geometry(const TriMesh2D& mesh) {
    const auto& p = mesh.vertices();
    areas = mesh.triangle_areas();
    grads.resize(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles()[t];
      for (int i = 0; i < 3; ++i) {
        const Vector2d e = p[tri[(i + 2) % 3]] - p[tri[(i + 1) % 3]];
        grads[t][i] = Vector2d(-e.y(), e.x()) / (2.0 * areas[t]);
      }
    }
  }
};

/// Element-constant gradient of a P1 scalar field.
inline std::vector<Vector2d> p1_gradient(const TriMesh2D& mesh, const P1Geometry& geo,
                                         const VectorXd& values) {
  std::vector<Vector2d> g(mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    g[t] = values[tri[0]] * geo.grads[t][0] + values[tri[1]] * geo.grads[t][1] +
           values[tri[2]] * geo.grads[t][2];
  }
  return g;
}

/// Scalar P1 stiffness (Neumann Laplacian).
inline SparseMatrix p1_laplacian(const TriMesh2D& mesh, const P1Geometry& geo) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(mesh.num_triangles() * 9);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        entries.emplace_back(tri[i], tri[j], geo.areas[t] * geo.grads[t][i].dot(geo.grads[t][j]));
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  SparseMatrix k(n, n);
  k.setFromTriplets(entries.begin(), entries.end());
  return k;
}

/// Consistent P1 mass matrix, so that integral(u v) = u^T M v exactly.
inline SparseMatrix p1_mass(const TriMesh2D& mesh) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(mesh.num_triangles() * 9);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double a = mesh.triangle_area(t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        entries.emplace_back(tri[i], tri[j], a * (i == j ? 2.0 : 1.0) / 12.0);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  SparseMatrix m(n, n);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

/// Lumped weights w with integral(u) = sum_v w_v u_v for P1 u.
inline VectorXd p1_integration_weights(const TriMesh2D& mesh) {
  VectorXd w = VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles()[t]) w[v] += mesh.triangle_area(t) / 3.0;
  }
  return w;
}

inline ElementField2D to_element_field(const TriMesh2D& mesh, const VectorField2D& u) {
  if (u.size() != mesh.num_vertices()) {
    throw Error(ErrorCode::invalid_input, "vector field length differs from vertex count");
  }
  ElementField2D out(mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    out[t] = {u[tri[0]], u[tri[1]], u[tri[2]]};
  }
  return out;
}

/// Exact L2 norm squared of a discontinuous P1 field.
inline double l2_norm_sq(const TriMesh2D& mesh, const ElementField2D& u) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& c = u[t];
    const Vector2d sum = c[0] + c[1] + c[2];
    s += mesh.triangle_area(t) / 12.0 *
         (c[0].squaredNorm() + c[1].squaredNorm() + c[2].squaredNorm() + sum.squaredNorm());
  }
  return s;
}

/// Exact integral of u . g for discontinuous P1 u and element-constant g.
inline double l2_inner(const TriMesh2D& mesh, const ElementField2D& u,
                       const std::vector<Vector2d>& g) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    s += mesh.triangle_area(t) * ((u[t][0] + u[t][1] + u[t][2]) / 3.0).dot(g[t]);
  }
  return s;
}

inline double l2_norm_sq(const TriMesh2D& mesh, const std::vector<Vector2d>& g) {
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    s += mesh.triangle_area(t) * g[t].squaredNorm();
  }
  return s;
}

/// Result of removing the gradient part of a field: u = Pu + grad(phi).
struct ProjectionResult {
  ElementField2D projected;            ///< Pu, exact discontinuous P1 form
  std::vector<Vector2d> grad_phi;      ///< element-constant grad(phi_u)
  VectorXd phi;                        ///< potential, area-weighted mean zero
  VectorField2D vertex_values;         ///< Pu averaged to vertices by area
  SolveResult solve;
};

/// L2 projection onto the orthogonal complement of P1 gradients.
inline ProjectionResult project_field(const TriMesh2D& mesh, const ElementField2D& u,
                                      double tol = 1e-10) {
  if (u.size() != mesh.num_triangles()) {
    throw Error(ErrorCode::invalid_input, "element field length differs from triangle count");
  }
  const P1Geometry geo(mesh);
  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  VectorXd rhs = VectorXd::Zero(nv);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Vector2d mean = (u[t][0] + u[t][1] + u[t][2]) / 3.0;
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) rhs[tri[i]] += geo.areas[t] * mean.dot(geo.grads[t][i]);
  }
  const SparseSpd system(p1_laplacian(mesh, geo), {VectorXd::Ones(nv)});
  // The basis gradients sum to zero, so rhs is consistent up to round-off;
  // remove that round-off, it is not small relative to rhs when u is nearly
  // divergence free.
  system.deflation()(rhs);

  ProjectionResult out;
  out.solve = solve_spd(system, rhs, tol);
  out.phi = out.solve.x;
  const VectorXd w = p1_integration_weights(mesh);
  out.phi.array() -= w.dot(out.phi) / w.sum();
  out.grad_phi = p1_gradient(mesh, geo, out.phi);

  out.projected.resize(mesh.num_triangles());
  out.vertex_values.assign(mesh.num_vertices(), Vector2d::Zero());
  std::vector<double> weight(mesh.num_vertices(), 0.0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) {
      out.projected[t][i] = u[t][i] - out.grad_phi[t];
      out.vertex_values[tri[i]] += geo.areas[t] * out.projected[t][i];
      weight[tri[i]] += geo.areas[t];
    }
  }
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) out.vertex_values[v] /= weight[v];
  return out;
}

inline ProjectionResult project_field(const TriMesh2D& mesh, const VectorField2D& u,
                                      double tol = 1e-10) {
  return project_field(mesh, to_element_field(mesh, u), tol);
}

/// The torsion constant: squared L2 norm of P(x3, -x2) on a normalized section.
inline double torsion_constant(const TriMesh2D& mesh, double tol = 1e-10) {
  VectorField2D rotation(mesh.num_vertices());
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const auto& p = mesh.vertices()[v];
    rotation[v] = {p.y(), -p.x()};
  }
  return l2_norm_sq(mesh, project_field(mesh, rotation, tol).projected);
}

inline double torsion_constant(const TriMesh2D& mesh, SectionGeometry& geometry,
                               double tol = 1e-10) {
  geometry.torsion_constant = torsion_constant(mesh, tol);
  return geometry.torsion_constant;
}

}  // namespace rodhom
