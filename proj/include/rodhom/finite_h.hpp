#pragma once

// Finite-thickness relaxation: minimizes
//   psi -> integral_Omega Q^h(x, iota(m) + grad_h psi)
// over P1 prism fields on [0, L] x omega with per-slice constraints
//   integral psi_c = 0 (c = 1, 2, 3),  integral x3 psi_2 = 0.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <future>
#include <memory>
#include <string>
#include <vector>

#include "rodhom/cross_section.hpp"
#include "rodhom/effective_stiffness.hpp"
#include "rodhom/error.hpp"
#include "rodhom/fem2d.hpp"
#include "rodhom/material.hpp"

namespace rodhom {

struct FiniteHOptions {
  double length = 1.0;
  int cells = 0;  ///< elements along x1; 0 picks max(8, ceil(2 L / h))
  double tol = 1e-9;
  std::size_t max_unknowns = 2'000'000;
  unsigned threads = 0;
};

struct FiniteHResult {
  double energy = 0.0;
  VectorXd psi;  ///< index 3 (j nv + v) + c for slice j, vertex v
  SolveResult solve;
};

/// Orthogonal projector onto fields satisfying the slice constraints.
class SliceConstraints {
 public:
  SliceConstraints(const TriMesh2D& mesh, int slices) : slices_(slices) {
    const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
    block_ = 3 * nv;
    const VectorXd w = p1_integration_weights(mesh);
    VectorXd x3(nv);
    for (Eigen::Index v = 0; v < nv; ++v) x3[v] = mesh.vertices()[v].y();
    const VectorXd mx3 = p1_mass(mesh) * x3;

    std::vector<VectorXd> raw;
    for (int c = 0; c < 3; ++c) {
      VectorXd e = VectorXd::Zero(block_);
      for (Eigen::Index v = 0; v < nv; ++v) e[3 * v + c] = w[v];
      raw.push_back(e);
    }
    VectorXd e = VectorXd::Zero(block_);
    for (Eigen::Index v = 0; v < nv; ++v) e[3 * v + 1] = mx3[v];
    raw.push_back(e);
    raw_ = raw;
    local_ = DenseDeflation(raw);
  }

  void operator()(VectorXd& x) const {
    for (int j = 0; j < slices_; ++j) {
      auto seg = x.segment(j * block_, block_);
      for (const auto& q : local_.basis()) seg -= q.dot(seg) * q;
    }
  }

  /// Largest constraint value over all slices.
  double violation(const VectorXd& x) const {
    double worst = 0.0;
    for (int j = 0; j < slices_; ++j) {
      const auto seg = x.segment(j * block_, block_);
      for (const auto& c : raw_) worst = std::max(worst, std::abs(c.dot(seg)));
    }
    return worst;
  }

 private:
  int slices_;
  Eigen::Index block_;
  std::vector<VectorXd> raw_;
  DenseDeflation local_;
};

class FiniteHProblem {
 public:
  FiniteHProblem(const TriMesh2D& mesh, const QuadraticLaw& law, double h,
                 const FiniteHOptions& options = {})
      : mesh_(mesh), geo_(mesh), h_(h), options_(options) {
    if (!(h > 0 && h <= 1)) throw Error(ErrorCode::invalid_parameter, "thickness h must lie in (0, 1]");
    if (!(options.length > 0)) throw Error(ErrorCode::invalid_parameter, "rod length must be positive");
    cells_ = options.cells > 0 ? options.cells
                               : std::max(8, static_cast<int>(std::ceil(2.0 * options.length / h)));
    dx_ = options.length / cells_;
    const std::size_t unknowns = 3 * mesh.num_vertices() * static_cast<std::size_t>(cells_ + 1);
    if (unknowns > options.max_unknowns) {
      throw Error(ErrorCode::size, "finite-h problem needs " + std::to_string(unknowns) +
                                       " unknowns, above the limit of " +
                                       std::to_string(options.max_unknowns));
    }
    tensors_.resize(mesh.num_triangles() * cells_);
    for (int e = 0; e < cells_; ++e) {
      for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Vector2d c = mesh.centroid_of(t);
        tensors_[e * mesh.num_triangles() + t] = law.tensor({(e + 0.5) * dx_, c.x(), c.y()});
      }
    }
    constraints_ = std::make_unique<SliceConstraints>(mesh, cells_ + 1);
    assemble();
  }

  int cells() const { return cells_; }
  double h() const { return h_; }
  Eigen::Index dofs() const {
    return 3 * static_cast<Eigen::Index>(mesh_.num_vertices()) * (cells_ + 1);
  }
  const SliceConstraints& constraints() const { return *constraints_; }

  FiniteHResult solve(const StrainLoad& load) const {
    VectorXd rhs = VectorXd::Zero(dofs());
    for_each_point([&](std::size_t, const Matrix6d& c, const Vector2d& q, double w,
                       const std::array<Index18, 1>& idx, const Eigen::Matrix<double, 6, 18>& b) {
      const Eigen::Matrix<double, 18, 1> local = -w * b.transpose() * (c * macro(load, q));
      for (int r = 0; r < 18; ++r) rhs[idx[0][r]] += local[r];
    });
    FiniteHResult out;
    const int cap = 20 * static_cast<int>(std::min<Eigen::Index>(dofs(), 5'000'000));
    out.solve = detail::projected_cg(stiffness_, rhs, *constraints_, options_.tol, cap);
    out.psi = out.solve.x;
    out.energy = energy(load, out.psi);
    return out;
  }

  /// Integral of Q^h(x, iota(m) + grad_h psi).
  double energy(const StrainLoad& load, const VectorXd& psi) const {
    return bilinear(load, psi, load, psi);
  }

  double bilinear(const StrainLoad& l1, const VectorXd& p1, const StrainLoad& l2,
                  const VectorXd& p2) const {
    double s = 0.0;
    for_each_point([&](std::size_t, const Matrix6d& c, const Vector2d& q, double w,
                       const std::array<Index18, 1>& idx, const Eigen::Matrix<double, 6, 18>& b) {
      Eigen::Matrix<double, 18, 1> a1, a2;
      for (int r = 0; r < 18; ++r) {
        a1[r] = p1[idx[0][r]];
        a2[r] = p2[idx[0][r]];
      }
      s += w * (macro(l1, q) + b * a1).dot(c * (macro(l2, q) + b * a2));
    });
    return s;
  }

  /// Admissible 3D field psi = h beta(x') from a section field beta, shifted
  /// by section rigid modes so that the slice constraints hold.
  VectorXd lift_section_field(const VectorXd& beta) const {
    const auto nv = static_cast<Eigen::Index>(mesh_.num_vertices());
    const VectorXd w = p1_integration_weights(mesh_);
    const double area = w.sum();
    VectorXd b = beta;
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (Eigen::Index v = 0; v < nv; ++v) mean += w[v] * b[3 * v + c];
      mean /= area;
      for (Eigen::Index v = 0; v < nv; ++v) b[3 * v + c] -= mean;
    }
    VectorXd x3(nv), b2(nv);
    for (Eigen::Index v = 0; v < nv; ++v) {
      x3[v] = mesh_.vertices()[v].y();
      b2[v] = b[3 * v + 1];
    }
    const SparseMatrix m = p1_mass(mesh_);
    const double s = x3.dot(m * b2) / x3.dot(m * x3);
    for (Eigen::Index v = 0; v < nv; ++v) {
      b[3 * v + 1] -= s * mesh_.vertices()[v].y();
      b[3 * v + 2] += s * mesh_.vertices()[v].x();
    }
    VectorXd psi(dofs());
    for (int j = 0; j <= cells_; ++j) psi.segment(j * 3 * nv, 3 * nv) = h_ * b;
    return psi;
  }

 private:
  using Index18 = std::array<Eigen::Index, 18>;

  static Vector6d macro(const StrainLoad& load, const Vector2d& q) {
    Matrix3d g = Matrix3d::Zero();
    g.col(0) = load.m(q);
    return mandel(g);
  }

  /// Visits the 6 quadrature points of every prism (3 edge midpoints times
  /// 2 Gauss points in x1), exact for the bi-quadratic integrands here.
  template <class Fn>
  void for_each_point(Fn&& fn) const {
    const auto nv = static_cast<Eigen::Index>(mesh_.num_vertices());
    const double g = 0.5 / std::sqrt(3.0);
    const auto& p = mesh_.vertices();
    for (int e = 0; e < cells_; ++e) {
      for (std::size_t t = 0; t < mesh_.num_triangles(); ++t) {
        const auto& tri = mesh_.triangles()[t];
        std::array<Index18, 1> idx;
        for (int k = 0; k < 2; ++k) {
          for (int i = 0; i < 3; ++i) {
            for (int c = 0; c < 3; ++c) idx[0][9 * k + 3 * i + c] = 3 * ((e + k) * nv + tri[i]) + c;
          }
        }
        const Matrix6d& ct = tensors_[e * mesh_.num_triangles() + t];
        const double w = mesh_.triangle_area(t) / 3.0 * dx_ / 2.0;
        for (int qk = 0; qk < 3; ++qk) {
          std::array<double, 3> lam{};
          lam[qk] = lam[(qk + 1) % 3] = 0.5;
          const Vector2d q = 0.5 * (p[tri[qk]] + p[tri[(qk + 1) % 3]]);
          for (double s : {0.5 - g, 0.5 + g}) {
            const std::array<double, 2> ell{1.0 - s, s};
            const std::array<double, 2> dell{-1.0 / dx_, 1.0 / dx_};
            Eigen::Matrix<double, 6, 18> b;
            for (int k = 0; k < 2; ++k) {
              for (int i = 0; i < 3; ++i) {
                const Vector3d grad(lam[i] * dell[k], geo_.grads[t][i].x() * ell[k] / h_,
                                    geo_.grads[t][i].y() * ell[k] / h_);
                for (int c = 0; c < 3; ++c) {
                  Matrix3d m = Matrix3d::Zero();
                  m.row(c) = grad.transpose();
                  b.col(9 * k + 3 * i + c) = mandel(m);
                }
              }
            }
            fn(t, ct, q, w, idx, b);
          }
        }
      }
    }
  }

  void assemble() {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(mesh_.num_triangles() * cells_ * 324);
    // Accumulate per prism before emitting triplets.
    Eigen::Matrix<double, 18, 18> k = Eigen::Matrix<double, 18, 18>::Zero();
    int count = 0;
    for_each_point([&](std::size_t, const Matrix6d& c, const Vector2d&, double w,
                       const std::array<Index18, 1>& idx, const Eigen::Matrix<double, 6, 18>& b) {
      k.noalias() += w * b.transpose() * c * b;
      if (++count == 6) {
        for (int r = 0; r < 18; ++r) {
          for (int s = 0; s < 18; ++s) entries.emplace_back(idx[0][r], idx[0][s], k(r, s));
        }
        k.setZero();
        count = 0;
      }
    });
    stiffness_.resize(dofs(), dofs());
    stiffness_.setFromTriplets(entries.begin(), entries.end());
  }

  TriMesh2D mesh_;
  P1Geometry geo_;
  double h_;
  FiniteHOptions options_;
  int cells_ = 0;
  double dx_ = 0.0;
  std::vector<Matrix6d> tensors_;
  std::unique_ptr<SliceConstraints> constraints_;
  SparseMatrix stiffness_;
};

/// K_h(m, [0, L]) for the law family evaluated at thickness h.
inline FiniteHResult finite_h_K(const TriMesh2D& mesh, const LawFamily& family,
                                const StrainLoad& load, double h,
                                const FiniteHOptions& options = {}) {
  return FiniteHProblem(mesh, family(h), h, options).solve(load);
}

/// The quadratic form K_h over coordinates (a, A12, A13, A23), assembled from
/// four unit solves by polarization.
inline Matrix4d finite_h_matrix(const TriMesh2D& mesh, const LawFamily& family, double h,
                                const FiniteHOptions& options = {}) {
  const FiniteHProblem problem(mesh, family(h), h, options);
  std::array<StrainLoad, 4> unit;
  for (int k = 0; k < 4; ++k) unit[k] = StrainLoad::from_coords(Vector4d::Unit(k));
  std::array<FiniteHResult, 4> r;
  if (resolve_threads(options.threads) > 1) {
    std::array<std::future<FiniteHResult>, 4> jobs;
    for (int k = 0; k < 4; ++k) {
      jobs[k] = std::async(std::launch::async, [&problem, &unit, k] { return problem.solve(unit[k]); });
    }
    for (int k = 0; k < 4; ++k) r[k] = jobs[k].get();
  } else {
    for (int k = 0; k < 4; ++k) r[k] = problem.solve(unit[k]);
  }
  Matrix4d m;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) m(i, j) = m(j, i) = problem.bilinear(unit[i], r[i].psi, unit[j], r[j].psi);
  }
  return m;
}

/// Squared L2(Omega) norm of m(A, a) on a normalized section.
inline double load_norm_sq(const StrainLoad& load, const SectionGeometry& g, double length) {
  return length * (g.area * load.a * load.a + g.mu2 * load.A12 * load.A12 +
                   g.mu3 * load.A13 * load.A13 + (g.mu2 + g.mu3) * load.A23 * load.A23);
}

}  // namespace rodhom
