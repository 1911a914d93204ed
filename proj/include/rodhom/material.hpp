#pragma once

// Pointwise elastic laws: quadratic forms Q(x, G) = L(x)G . G and nonlinear
// densities W(x, F) with their admissibility checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rodhom/error.hpp"
#include "rodhom/so3.hpp"

namespace rodhom {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Mandel vector of sym(g): (e11, e22, e33, r2 e23, r2 e13, r2 e12), so that
/// |sym g|^2 equals the squared Euclidean norm.
inline Vector6d mandel(const Matrix3d& g) {
  const double r2 = std::sqrt(2.0);
  Vector6d s;
  s << g(0, 0), g(1, 1), g(2, 2), r2 * 0.5 * (g(1, 2) + g(2, 1)),
      r2 * 0.5 * (g(0, 2) + g(2, 0)), r2 * 0.5 * (g(0, 1) + g(1, 0));
  return s;
}

inline Matrix3d from_mandel(const Vector6d& s) {
  const double k = 1.0 / std::sqrt(2.0);
  Matrix3d g;
  g << s[0], k * s[5], k * s[4],
       k * s[5], s[1], k * s[3],
       k * s[4], k * s[3], s[2];
  return g;
}

inline Matrix6d isotropic_tensor(double lambda, double mu) {
  Matrix6d c = 2.0 * mu * Matrix6d::Identity();
  c.topLeftCorner<3, 3>().array() += lambda;
  return c;
}

enum class Axis { x1 = 0, x2 = 1, x3 = 2 };

inline Axis parse_axis(const std::string& s) {
  if (s == "x1") return Axis::x1;
  if (s == "x2") return Axis::x2;
  if (s == "x3") return Axis::x3;
  throw Error(ErrorCode::invalid_parameter, "unknown direction '" + s + "' (expected x1, x2 or x3)");
}

/// Quadratic law Q(x, G) = L(x) sym G . sym G with eta1 |sym G|^2 <= Q <= eta2 |sym G|^2.
class QuadraticLaw {
 public:
  using TensorFn = std::function<Matrix6d(const Vector3d&)>;

  QuadraticLaw(TensorFn tensor, double eta1, double eta2, bool x1_dependent,
               std::string description)
      : tensor_(std::move(tensor)), eta1_(eta1), eta2_(eta2),
        x1_dependent_(x1_dependent), description_(std::move(description)) {}

  Matrix6d tensor(const Vector3d& x) const { return tensor_(x); }

  double operator()(const Vector3d& x, const Matrix3d& g) const {
    const Vector6d s = mandel(g);
    return s.dot(tensor_(x) * s);
  }

  /// L(x) G as a symmetric matrix.
  Matrix3d apply(const Vector3d& x, const Matrix3d& g) const {
    return from_mandel(tensor_(x) * mandel(g));
  }

  double eta1() const { return eta1_; }
  double eta2() const { return eta2_; }
  bool x1_dependent() const { return x1_dependent_; }
  const std::string& description() const { return description_; }

 private:
  TensorFn tensor_;
  double eta1_;
  double eta2_;
  bool x1_dependent_;
  std::string description_;
};

/// Family of quadratic laws indexed by the thickness h.
using LawFamily = std::function<QuadraticLaw(double h)>;

/// Nonlinear stored energy W(x, F) with its quadratic expansion at the identity.
class NonlinearLaw {
 public:
  using DensityFn = std::function<double(const Vector3d&, const Matrix3d&)>;

  NonlinearLaw(DensityFn density, QuadraticLaw quadratic, double eta1, double eta2,
               double well_radius, std::string description)
      : density_(std::move(density)), quadratic_(std::move(quadratic)), eta1_(eta1),
        eta2_(eta2), rho_(well_radius), description_(std::move(description)) {}

  double operator()(const Vector3d& x, const Matrix3d& f) const { return density_(x, f); }
  const QuadraticLaw& quadratic() const { return quadratic_; }
  double eta1() const { return eta1_; }
  double eta2() const { return eta2_; }
  double well_radius() const { return rho_; }
  const std::string& description() const { return description_; }

 private:
  DensityFn density_;
  QuadraticLaw quadratic_;
  double eta1_;
  double eta2_;
  double rho_;
  std::string description_;
};

inline void check_lame(double lambda, double mu) {
  if (!(mu > 0) || !(lambda >= 0) || !std::isfinite(mu) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::invalid_parameter, "Lame parameters need mu > 0 and lambda >= 0");
  }
}

inline QuadraticLaw make_isotropic_quadratic(double lambda, double mu) {
  check_lame(lambda, mu);
  const Matrix6d c = isotropic_tensor(lambda, mu);
  return QuadraticLaw([c](const Vector3d&) { return c; }, 2.0 * mu, 2.0 * mu + 3.0 * lambda,
                      false,
                      "isotropic(lambda=" + std::to_string(lambda) + ", mu=" + std::to_string(mu) + ")");
}

/// Saint Venant-Kirchhoff density (mu/2)|F^T F - I|^2 + (lambda/4) tr(F^T F - I)^2,
/// plus 2 mu sigma_min on orientation-reversing F so that the density controls
/// the distance to SO(3) rather than O(3).
inline double svk_density(double lambda, double mu, const Matrix3d& f) {
  const Matrix3d e = f.transpose() * f - Matrix3d::Identity();
  const double tr = e.trace();
  double w = 0.5 * mu * e.squaredNorm() + 0.25 * lambda * tr * tr;
  if (f.determinant() < 0) {
    Eigen::JacobiSVD<Matrix3d> svd(f);
    w += 2.0 * mu * svd.singularValues().minCoeff();
  }
  return w;
}

/// Well radius used for the upper bound in the non-degeneracy axiom.
inline constexpr double kIsotropicWellRadius = 0.25;

inline NonlinearLaw make_isotropic(double lambda, double mu) {
  QuadraticLaw q = make_isotropic_quadratic(lambda, mu);
  // On dist^2 <= 1/4 every singular value lies in [1/2, 3/2], hence
  // (s^2 - 1)^2 <= 6.25 (s - 1)^2.
  const double eta2 = 6.25 * (0.5 * mu + 0.75 * lambda);
  return NonlinearLaw([lambda, mu](const Vector3d&, const Matrix3d& f) {
                        return svk_density(lambda, mu, f);
                      },
                      std::move(q), 0.5 * mu, eta2, kIsotropicWellRadius,
                      "svk(lambda=" + std::to_string(lambda) + ", mu=" + std::to_string(mu) + ")");
}

namespace detail {

inline double fractional(double t) { return t - std::floor(t); }

inline void check_laminate(double period, double fraction) {
  if (!(period > 0) || !std::isfinite(period)) {
    throw Error(ErrorCode::invalid_parameter, "laminate period must be positive");
  }
  if (!(fraction > 0 && fraction < 1)) {
    throw Error(ErrorCode::invalid_parameter, "volume fraction must lie in (0, 1)");
  }
}

}  // namespace detail

/// Phase a where frac(x_dir / period) < fraction, phase b elsewhere.
inline QuadraticLaw make_laminate(const QuadraticLaw& phase_a, const QuadraticLaw& phase_b,
                                  Axis direction, double period, double fraction) {
  detail::check_laminate(period, fraction);
  const int k = static_cast<int>(direction);
  auto a = std::make_shared<QuadraticLaw>(phase_a);
  auto b = std::make_shared<QuadraticLaw>(phase_b);
  return QuadraticLaw(
      [a, b, k, period, fraction](const Vector3d& x) {
        return detail::fractional(x[k] / period) < fraction ? a->tensor(x) : b->tensor(x);
      },
      std::min(phase_a.eta1(), phase_b.eta1()), std::max(phase_a.eta2(), phase_b.eta2()),
      direction == Axis::x1 || phase_a.x1_dependent() || phase_b.x1_dependent(),
      "laminate(" + phase_a.description() + ", " + phase_b.description() + ")");
}

inline NonlinearLaw make_laminate(const NonlinearLaw& phase_a, const NonlinearLaw& phase_b,
                                  Axis direction, double period, double fraction) {
  QuadraticLaw q = make_laminate(phase_a.quadratic(), phase_b.quadratic(), direction, period, fraction);
  const int k = static_cast<int>(direction);
  auto a = std::make_shared<NonlinearLaw>(phase_a);
  auto b = std::make_shared<NonlinearLaw>(phase_b);
  return NonlinearLaw(
      [a, b, k, period, fraction](const Vector3d& x, const Matrix3d& f) {
        return detail::fractional(x[k] / period) < fraction ? (*a)(x, f) : (*b)(x, f);
      },
      std::move(q), std::min(phase_a.eta1(), phase_b.eta1()),
      std::max(phase_a.eta2(), phase_b.eta2()),
      std::min(phase_a.well_radius(), phase_b.well_radius()),
      "laminate(" + phase_a.description() + ", " + phase_b.description() + ")");
}

/// Checkerboard in the cross-section plane: phase a where
/// floor(x2/p) + floor(x3/p) is even.
inline QuadraticLaw make_checkerboard(const QuadraticLaw& phase_a, const QuadraticLaw& phase_b,
                                      double period) {
  detail::check_laminate(period, 0.5);
  auto a = std::make_shared<QuadraticLaw>(phase_a);
  auto b = std::make_shared<QuadraticLaw>(phase_b);
  return QuadraticLaw(
      [a, b, period](const Vector3d& x) {
        const auto cell = static_cast<long long>(std::floor(x[1] / period)) +
                          static_cast<long long>(std::floor(x[2] / period));
        return cell % 2 == 0 ? a->tensor(x) : b->tensor(x);
      },
      std::min(phase_a.eta1(), phase_b.eta1()), std::max(phase_a.eta2(), phase_b.eta2()),
      phase_a.x1_dependent() || phase_b.x1_dependent(),
      "checkerboard(" + phase_a.description() + ", " + phase_b.description() + ")");
}

// ---------------------------------------------------------------------------
// Sampled checks

struct AxiomResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;  ///< largest violation found, 0 if none
  std::string detail;
};

struct AdmissibilityReport {
  std::vector<AxiomResult> axioms;
  bool all_passed() const {
    return std::all_of(axioms.begin(), axioms.end(), [](const AxiomResult& a) { return a.passed; });
  }
  const AxiomResult& operator[](const std::string& name) const {
    for (const auto& a : axioms) {
      if (a.name == name) return a;
    }
    throw Error(ErrorCode::invalid_input, "no axiom named " + name);
  }
};

namespace detail {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

  Matrix3d matrix() {
    Matrix3d g;
    for (int i = 0; i < 9; ++i) g(i) = normal();
    return g;
  }
  Matrix3d rotation() { return rotation_from_uniforms(uniform(), uniform(), uniform()); }
  Vector3d point(double scale = 1.0) {
    return {uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale)};
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace detail

/// Samples the axioms of the class W(eta1, eta2, rho) for a nonlinear law.
inline AdmissibilityReport check_admissible(const NonlinearLaw& law, int samples,
                                            std::uint64_t seed = 1) {
  if (samples < 10) throw Error(ErrorCode::invalid_parameter, "check_admissible needs >= 10 samples");
  detail::Sampler rnd(seed);
  AxiomResult w1{"W1", true, 0.0, "frame indifference"};
  AxiomResult w2{"W2", true, 0.0, "non-degeneracy"};
  AxiomResult w3{"W3", true, 0.0, "minimum at identity"};
  AxiomResult w4{"W4", true, 0.0, "quadratic expansion"};
  const QuadraticLaw& q = law.quadratic();

  for (int n = 0; n < samples; ++n) {
    const Vector3d x = rnd.point(2.0);
    // Mix of deformations near the well, moderate strains and reflections.
    Matrix3d f;
    switch (n % 4) {
      case 0: f = rnd.rotation() * (Matrix3d::Identity() + 0.1 * rnd.matrix()); break;
      case 1: f = rnd.rotation() * (Matrix3d::Identity() + rnd.uniform(0.2, 1.0) * rnd.matrix()); break;
      case 2: f = rnd.uniform(0.0, 3.0) * rnd.matrix(); break;
      default: {
        Matrix3d reflect = Matrix3d::Identity();
        reflect(2, 2) = -1.0;
        f = rnd.rotation() * reflect * (Matrix3d::Identity() + 0.2 * rnd.matrix());
      }
    }
    const double w = law(x, f);

    for (int k = 0; k < 20; ++k) {
      const Matrix3d r = rnd.rotation();
      const double v = std::abs(law(x, r * f) - w);
      if (v > 1e-10 * std::max(1.0, std::abs(w))) {
        w1.passed = false;
      }
      w1.worst = std::max(w1.worst, v);
    }

    const double d2 = dist2_so3(f);
    const double lower = law.eta1() * d2 - w;
    if (lower > 1e-12 * std::max(1.0, w)) {
      w2.passed = false;
      w2.worst = std::max(w2.worst, lower);
    }
    if (d2 <= law.well_radius()) {
      const double upper = w - law.eta2() * d2;
      if (upper > 1e-12 * std::max(1.0, w)) {
        w2.passed = false;
        w2.worst = std::max(w2.worst, upper);
      }
    }

    const double w_id = std::abs(law(x, Matrix3d::Identity()));
    if (w_id > 1e-14) w3.passed = false;
    w3.worst = std::max(w3.worst, w_id);
    if (w < -1e-14) {
      w3.passed = false;
      w3.worst = std::max(w3.worst, -w);
    }

    const Matrix3d g = rnd.matrix();
    double previous = std::numeric_limits<double>::infinity();
    double last = 0.0;
    // The expansion modulus is a sup over a ball; taking +G and -G removes
    // accidental cancellation between odd and even remainder terms.
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      double ratio = 0.0;
      for (double sign : {1.0, -1.0}) {
        const Matrix3d ge = sign * eps * g;
        ratio = std::max(ratio, std::abs(law(x, Matrix3d::Identity() + ge) - q(x, ge)) / (eps * eps));
      }
      if (ratio > previous * (1.0 + 1e-6) + 1e-12) w4.passed = false;
      previous = ratio;
      last = ratio;
    }
    const double scale = std::max(1.0, g.squaredNorm());
    if (last > 1e-2 * scale) w4.passed = false;
    w4.worst = std::max(w4.worst, last / scale);
  }
  return {{w1, w2, w3, w4}};
}

/// Samples the quadratic-law properties: dependence on sym G only, the
/// eta bounds, symmetry of L, the Lipschitz estimate and semidefiniteness.
inline AdmissibilityReport check_quadratic_law(const QuadraticLaw& law, int samples,
                                               std::uint64_t seed = 1, double x_scale = 2.0) {
  if (samples < 10) throw Error(ErrorCode::invalid_parameter, "check_quadratic_law needs >= 10 samples");
  detail::Sampler rnd(seed);
  AxiomResult q1{"Q1", true, 0.0, "depends on sym G only"};
  AxiomResult bounds{"bounds", true, 0.0, "eta1 |sym G|^2 <= Q <= eta2 |sym G|^2"};
  AxiomResult symmetry{"symmetry", true, 0.0, "L(x) G1 . G2 = G1 . L(x) G2"};
  AxiomResult lipschitz{"lipschitz", true, 0.0, "|Q(G1) - Q(G2)| <= eta2 |sym(G1-G2)| |sym(G1+G2)|"};
  for (int n = 0; n < samples; ++n) {
    const Vector3d x = rnd.point(x_scale);
    const Matrix3d g = rnd.matrix();
    const Matrix3d g2 = rnd.matrix();
    const double qg = law(x, g);
    const double scale = std::max(1.0, std::abs(qg));

    const Matrix3d s = skw(rnd.matrix());
    const double v1 = std::abs(law(x, g + s) - qg);
    q1.worst = std::max(q1.worst, v1 / scale);
    if (v1 > 1e-12 * scale) q1.passed = false;

    const double n2 = sym(g).squaredNorm();
    const double lo = law.eta1() * n2 - qg;
    const double hi = qg - law.eta2() * n2;
    const double vb = std::max({0.0, lo, hi});
    bounds.worst = std::max(bounds.worst, vb);
    if (vb > 1e-12 * scale) bounds.passed = false;

    const double a = (law.apply(x, g).cwiseProduct(g2)).sum();
    const double b = (g.cwiseProduct(law.apply(x, g2))).sum();
    const double vs = std::abs(a - b);
    symmetry.worst = std::max(symmetry.worst, vs);
    if (vs > 1e-12 * std::max(1.0, std::abs(a))) symmetry.passed = false;

    const double lhs = std::abs(qg - law(x, g2));
    const double rhs = law.eta2() * sym(g - g2).norm() * sym(g + g2).norm();
    const double vl = lhs - rhs;
    if (vl > 1e-12 * std::max(1.0, lhs)) {
      lipschitz.passed = false;
      lipschitz.worst = std::max(lipschitz.worst, vl);
    }
  }
  return {{q1, bounds, symmetry, lipschitz}};
}

}  // namespace rodhom
