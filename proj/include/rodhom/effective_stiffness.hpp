#pragma once

// Cross-section corrector problems and the effective rod stiffness for laws
// that do not depend on x1.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include "rodhom/cross_section.hpp"
#include "rodhom/error.hpp"
#include "rodhom/fem2d.hpp"
#include "rodhom/material.hpp"
#include "rodhom/so3.hpp"

namespace rodhom {

using Eigen::Matrix4d;
using Eigen::Vector4d;

/// Macroscopic load: stretch a and skew A stored as (A12, A13, A23).
struct StrainLoad {
  double a = 0.0;
  double A12 = 0.0;
  double A13 = 0.0;
  double A23 = 0.0;

  /// Coordinates (a, A12, A13, A23).
  Vector4d coords() const { return {a, A12, A13, A23}; }
  static StrainLoad from_coords(const Vector4d& c) { return {c[0], c[1], c[2], c[3]}; }

  Matrix3d skew() const {
    Matrix3d s;
    s << 0.0, A12, A13,
         -A12, 0.0, A23,
         -A13, -A23, 0.0;
    return s;
  }
  static StrainLoad from_skew(const Matrix3d& s, double a = 0.0) {
    if ((s + s.transpose()).norm() > 1e-10 * std::max(1.0, s.norm())) {
      throw Error(ErrorCode::invalid_input, "load matrix must be skew-symmetric");
    }
    return {a, s(0, 1), s(0, 2), s(1, 2)};
  }

  /// m(A, a) = A d_omega + a e1 at a section point.
  Vector3d m(const Vector2d& p) const {
    return {a + A12 * p.x() + A13 * p.y(), A23 * p.y(), -A23 * p.x()};
  }
};

/// Skew coordinates (A12, A13, A23) of hat(v): (-v3, v2, -v1).
inline Vector3d skew_coords(const Vector3d& axial) { return {-axial.z(), axial.y(), -axial.x()}; }
inline Vector3d axial_from_coords(const Vector3d& c) { return {-c.z(), c.y(), -c.x()}; }

struct EffectiveStiffness {
  Matrix4d M = Matrix4d::Zero();          ///< over (a, A12, A13, A23)
  Matrix3d Q0 = Matrix3d::Zero();         ///< over (A12, A13, A23)
  Vector3d a_min_coeffs = Vector3d::Zero();
  std::array<double, 4> residuals{};      ///< relative residual per unit solve
  std::array<int, 4> iterations{};
};

/// Q(A, a) = c^T M c with c = (a, A12, A13, A23).
inline double q_eval(const EffectiveStiffness& s, const StrainLoad& load) {
  const Vector4d c = load.coords();
  return c.dot(s.M * c);
}

inline double q0_eval(const EffectiveStiffness& s, const Vector3d& coords) {
  return coords.dot(s.Q0 * coords);
}
inline double q0_eval(const EffectiveStiffness& s, const Matrix3d& A) {
  const StrainLoad l = StrainLoad::from_skew(A);
  return q0_eval(s, Vector3d(l.A12, l.A13, l.A23));
}

inline double a_min_eval(const EffectiveStiffness& s, const Vector3d& coords) {
  return s.a_min_coeffs.dot(coords);
}
inline double a_min_eval(const EffectiveStiffness& s, const Matrix3d& A) {
  const StrainLoad l = StrainLoad::from_skew(A);
  return a_min_eval(s, Vector3d(l.A12, l.A13, l.A23));
}

/// Schur reduction of a 4x4 stiffness onto the bending-torsion block.
inline void reduce_stiffness(EffectiveStiffness& s) {
  const double maa = s.M(0, 0);
  if (!(maa > 0)) throw Error(ErrorCode::consistency, "stretch stiffness is not positive");
  const Vector3d maA = s.M.block<1, 3>(0, 1).transpose();
  s.Q0 = s.M.block<3, 3>(1, 1) - maA * maA.transpose() / maa;
  s.Q0 = 0.5 * (s.Q0 + s.Q0.transpose());
  s.a_min_coeffs = -maA / maa;
}

struct CorrectorResult {
  VectorXd beta;        ///< 3 values per vertex, index 3v + c
  double energy = 0.0;  ///< integral of Q over the section
  SolveResult solve;
};

struct StiffnessOptions {
  double tol = 1e-10;
  unsigned threads = 0;  ///< 0: hardware concurrency
};

/// The minimization of
///   beta -> integral Q(x', sym[m(A,a) (x) e1 + (0 | d2 beta | d3 beta)])
/// over P1 fields beta, with translations and the in-plane rotation of
/// (beta2, beta3) removed.
class CorrectorProblem {
 public:
  CorrectorProblem(const TriMesh2D& mesh, const QuadraticLaw& law)
      : mesh_(mesh), geo_(mesh) {
    require_x1_independent(mesh, law);
    tensors_.reserve(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const Vector2d c = mesh.centroid_of(t);
      tensors_.push_back(law.tensor({0.0, c.x(), c.y()}));
    }
    assemble();
  }

  const TriMesh2D& mesh() const { return mesh_; }
  Eigen::Index dofs() const { return 3 * static_cast<Eigen::Index>(mesh_.num_vertices()); }
  const SparseSpd& system() const { return *system_; }
  const Matrix6d& tensor(std::size_t t) const { return tensors_[t]; }

  /// Mandel strain of the corrector on triangle t (element constant).
  Vector6d corrector_strain(std::size_t t, const VectorXd& beta) const {
    Matrix3d g = Matrix3d::Zero();
    const auto& tri = mesh_.triangles()[t];
    for (int i = 0; i < 3; ++i) {
      const Vector3d b(beta[3 * tri[i]], beta[3 * tri[i] + 1], beta[3 * tri[i] + 2]);
      g.col(1) += geo_.grads[t][i].x() * b;
      g.col(2) += geo_.grads[t][i].y() * b;
    }
    return mandel(g);
  }

  static Vector6d macro_strain(const StrainLoad& load, const Vector2d& p) {
    Matrix3d g = Matrix3d::Zero();
    g.col(0) = load.m(p);
    return mandel(g);
  }

  /// Exact integral of the polarized energy density for two loads and their
  /// correctors (edge-midpoint rule, integrand quadratic per triangle).
  double bilinear(const StrainLoad& l1, const VectorXd& b1, const StrainLoad& l2,
                  const VectorXd& b2) const {
    double s = 0.0;
    const auto& p = mesh_.vertices();
    for (std::size_t t = 0; t < mesh_.num_triangles(); ++t) {
      const auto& tri = mesh_.triangles()[t];
      const Vector6d e1 = corrector_strain(t, b1);
      const Vector6d e2 = corrector_strain(t, b2);
      double local = 0.0;
      for (int k = 0; k < 3; ++k) {
        const Vector2d q = 0.5 * (p[tri[k]] + p[tri[(k + 1) % 3]]);
        local += (macro_strain(l1, q) + e1).dot(tensors_[t] * (macro_strain(l2, q) + e2));
      }
      s += mesh_.triangle_area(t) / 3.0 * local;
    }
    return s;
  }

  double energy(const StrainLoad& load, const VectorXd& beta) const {
    return bilinear(load, beta, load, beta);
  }

  CorrectorResult solve(const StrainLoad& load, double tol = 1e-10) const {
    VectorXd rhs = VectorXd::Zero(dofs());
    double scale = 0.0;
    for (std::size_t t = 0; t < mesh_.num_triangles(); ++t) {
      const Vector2d c = mesh_.centroid_of(t);
      // The macro strain is linear on the triangle; its mean is the centroid value.
      const Vector6d load_stress = tensors_[t] * macro_strain(load, c);
      const auto& tri = mesh_.triangles()[t];
      for (int i = 0; i < 3; ++i) {
        for (int comp = 0; comp < 3; ++comp) {
          const double v = -mesh_.triangle_area(t) * basis_strain(t, i, comp).dot(load_stress);
          rhs[3 * tri[i] + comp] += v;
          scale += v * v;
        }
      }
    }
    CorrectorResult out;
    out.solve = solve_spd(*system_, rhs, tol, -1, std::sqrt(scale));
    out.beta = out.solve.x;
    out.energy = energy(load, out.beta);
    return out;
  }

 private:
  static void require_x1_independent(const TriMesh2D& mesh, const QuadraticLaw& law) {
    if (law.x1_dependent()) {
      throw Error(ErrorCode::unsupported_material,
                  "cross-section correctors need a law independent of x1: " + law.description());
    }
    const std::size_t step = std::max<std::size_t>(1, mesh.num_triangles() / 64);
    for (std::size_t t = 0; t < mesh.num_triangles(); t += step) {
      const Vector2d c = mesh.centroid_of(t);
      const Matrix6d ref = law.tensor({0.0, c.x(), c.y()});
      for (double x1 : {0.318309886, 1.7320508, -2.7182818, 13.0}) {
        if ((law.tensor({x1, c.x(), c.y()}) - ref).norm() > 1e-14 * (1.0 + ref.norm())) {
          throw Error(ErrorCode::unsupported_material,
                      "material law varies with x1; use the finite-h solver instead");
        }
      }
    }
  }

  /// Mandel strain of basis function lambda_i e_comp.
  Vector6d basis_strain(std::size_t t, int i, int comp) const {
    Matrix3d g = Matrix3d::Zero();
    g(comp, 1) = geo_.grads[t][i].x();
    g(comp, 2) = geo_.grads[t][i].y();
    return mandel(g);
  }

  void assemble() {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(mesh_.num_triangles() * 81);
    for (std::size_t t = 0; t < mesh_.num_triangles(); ++t) {
      Eigen::Matrix<double, 6, 9> b;
      for (int i = 0; i < 3; ++i) {
        for (int comp = 0; comp < 3; ++comp) b.col(3 * i + comp) = basis_strain(t, i, comp);
      }
      const Eigen::Matrix<double, 9, 9> k = mesh_.triangle_area(t) * b.transpose() * tensors_[t] * b;
      const auto& tri = mesh_.triangles()[t];
      for (int r = 0; r < 9; ++r) {
        for (int c = 0; c < 9; ++c) {
          entries.emplace_back(3 * tri[r / 3] + r % 3, 3 * tri[c / 3] + c % 3, k(r, c));
        }
      }
    }
    SparseMatrix k(dofs(), dofs());
    k.setFromTriplets(entries.begin(), entries.end());

    std::vector<VectorXd> kernel;
    for (int comp = 0; comp < 3; ++comp) {
      VectorXd v = VectorXd::Zero(dofs());
      for (std::size_t n = 0; n < mesh_.num_vertices(); ++n) v[3 * n + comp] = 1.0;
      kernel.push_back(v);
    }
    VectorXd rot = VectorXd::Zero(dofs());
    for (std::size_t n = 0; n < mesh_.num_vertices(); ++n) {
      rot[3 * n + 1] = -mesh_.vertices()[n].y();
      rot[3 * n + 2] = mesh_.vertices()[n].x();
    }
    kernel.push_back(rot);
    system_ = std::make_unique<SparseSpd>(std::move(k), std::move(kernel));
  }

  TriMesh2D mesh_;
  P1Geometry geo_;
  std::vector<Matrix6d> tensors_;
  std::unique_ptr<SparseSpd> system_;
};

inline CorrectorResult corrector_solve(const TriMesh2D& mesh, const QuadraticLaw& law,
                                       const StrainLoad& load, double tol = 1e-10) {
  return CorrectorProblem(mesh, law).solve(load, tol);
}

/// Unit-load correctors, kept for reuse by the 3D recovery construction.
struct SectionCorrectors {
  std::array<VectorXd, 4> beta;  ///< for e_a, e_A12, e_A13, e_A23

  /// Corrector of a general load by linearity.
  VectorXd combine(const StrainLoad& load) const {
    const Vector4d c = load.coords();
    VectorXd out = c[0] * beta[0];
    for (int k = 1; k < 4; ++k) out += c[k] * beta[k];
    return out;
  }
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline EffectiveStiffness effective_matrix(const TriMesh2D& mesh, const QuadraticLaw& law,
                                           const StiffnessOptions& options = {},
                                           SectionCorrectors* correctors = nullptr) {
  const CorrectorProblem problem(mesh, law);
  std::array<StrainLoad, 4> unit;
  for (int k = 0; k < 4; ++k) unit[k] = StrainLoad::from_coords(Vector4d::Unit(k));

  std::array<CorrectorResult, 4> results;
  const unsigned threads = resolve_threads(options.threads);
  if (threads > 1) {
    std::array<std::future<CorrectorResult>, 4> jobs;
    for (int k = 0; k < 4; ++k) {
      jobs[k] = std::async(std::launch::async, [&problem, &unit, k, &options] {
        return problem.solve(unit[k], options.tol);
      });
    }
    for (int k = 0; k < 4; ++k) results[k] = jobs[k].get();
  } else {
    for (int k = 0; k < 4; ++k) results[k] = problem.solve(unit[k], options.tol);
  }

  EffectiveStiffness s;
  for (int i = 0; i < 4; ++i) {
    s.residuals[i] = results[i].solve.relative_residual;
    s.iterations[i] = results[i].solve.iterations;
    for (int j = i; j < 4; ++j) {
      s.M(i, j) = s.M(j, i) = problem.bilinear(unit[i], results[i].beta, unit[j], results[j].beta);
    }
  }
  reduce_stiffness(s);
  if (correctors) {
    for (int k = 0; k < 4; ++k) correctors->beta[k] = std::move(results[k].beta);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Bounds of the limit quadratic forms, sampled on random loads.

struct StiffnessBoundReport {
  bool upper_q = true;     ///< Q <= eta2 (max(mu2,mu3)|A|^2 + |omega| a^2)
  bool upper_q0 = true;    ///< Q0 <= eta2 max(mu2,mu3) |A|^2
  bool lower_q0 = true;    ///< Q0 >= eta1 min(mu2, mu3, C/2) |A|^2
  bool q_above_q0 = true;  ///< Q(A, a) >= Q0(A), equality at a_min
  double fitted_c_omega = 0.0;  ///< min of Q / (|A|_F^2 + a^2)
  double fitted_c_a = 0.0;      ///< max of |a_min| / |A|_F
  double worst_upper = 0.0;     ///< max ratio to the upper bound of Q
  double worst_lower = 0.0;     ///< min ratio of Q0 to its lower bound
  bool all() const { return upper_q && upper_q0 && lower_q0 && q_above_q0 && fitted_c_omega > 0; }
};

/// |A|^2 in these bounds is A12^2 + A13^2 + A23^2 (half the Frobenius norm),
/// the convention in which the torsion part of the lower bound is sharp.
inline StiffnessBoundReport check_stiffness_bounds(const EffectiveStiffness& s,
                                                   const SectionGeometry& g, double eta1,
                                                   double eta2, int samples,
                                                   std::uint64_t seed = 1, double rel_tol = 1e-8) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  StiffnessBoundReport r;
  r.fitted_c_omega = std::numeric_limits<double>::infinity();
  r.worst_lower = std::numeric_limits<double>::infinity();
  const double mu_max = std::max(g.mu2, g.mu3);
  const double mu_min = std::min({g.mu2, g.mu3, 0.5 * g.torsion_constant});
  for (int n = 0; n < samples; ++n) {
    const Vector4d c(nd(rng), nd(rng), nd(rng), nd(rng));
    const Vector3d a3 = c.tail<3>();
    const double a2 = a3.squaredNorm();
    const double q = c.dot(s.M * c);
    const double q0 = q0_eval(s, a3);

    const double upper = eta2 * (mu_max * a2 + g.area * c[0] * c[0]);
    if (q > upper * (1 + rel_tol)) r.upper_q = false;
    r.worst_upper = std::max(r.worst_upper, q / upper);
    if (q0 > eta2 * mu_max * a2 * (1 + rel_tol)) r.upper_q0 = false;
    const double lower = eta1 * mu_min * a2;
    if (q0 < lower * (1 - rel_tol)) r.lower_q0 = false;
    r.worst_lower = std::min(r.worst_lower, q0 / lower);
    if (q < q0 * (1 - rel_tol) - 1e-14) r.q_above_q0 = false;
    const double at_min = Vector4d(a_min_eval(s, a3), a3[0], a3[1], a3[2]).dot(
        s.M * Vector4d(a_min_eval(s, a3), a3[0], a3[1], a3[2]));
    if (std::abs(at_min - q0) > rel_tol * std::max(q0, 1e-300)) r.q_above_q0 = false;

    r.fitted_c_omega = std::min(r.fitted_c_omega, q / (2 * a2 + c[0] * c[0]));
    r.fitted_c_a = std::max(r.fitted_c_a, std::abs(a_min_eval(s, a3)) / std::sqrt(2 * a2));
  }
  return r;
}

}  // namespace rodhom
