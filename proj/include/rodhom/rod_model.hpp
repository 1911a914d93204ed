#pragma once

// Limit rod model: frame curves in SO(3), the energy integral of Q0(R^T R'),
// its minimization under clamped ends, and frame reconstruction.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rodhom/effective_stiffness.hpp"
#include "rodhom/error.hpp"
#include "rodhom/so3.hpp"

namespace rodhom {

class FrameCurve {
 public:
  FrameCurve() = default;

  FrameCurve(double length, std::vector<Quaterniond> nodes) : length_(length), nodes_(std::move(nodes)) {
    if (!(length > 0)) throw Error(ErrorCode::invalid_parameter, "rod length must be positive");
    if (nodes_.size() < 3) throw Error(ErrorCode::invalid_parameter, "frame curve needs N >= 2");
    for (auto& q : nodes_) {
      const double n = q.norm();
      if (!(std::abs(n - 1.0) < 1e-6)) {
        throw Error(ErrorCode::invalid_input, "frame node is not a unit quaternion");
      }
      q.normalize();
    }
  }

  /// Constant frame R0 on N intervals.
  static FrameCurve constant(double length, int n, const Quaterniond& r0 = Quaterniond::Identity()) {
    return FrameCurve(length, std::vector<Quaterniond>(static_cast<std::size_t>(n) + 1, r0));
  }

  double length() const { return length_; }
  int intervals() const { return static_cast<int>(nodes_.size()) - 1; }
  double step() const { return length_ / intervals(); }
  const std::vector<Quaterniond>& nodes() const { return nodes_; }
  std::vector<Quaterniond>& nodes() { return nodes_; }
  Matrix3d rotation(int i) const { return nodes_[i].toRotationMatrix(); }

  /// Largest |R_i^T R_i - I| over the nodes.
  double orthogonality_defect() const {
    double worst = 0.0;
    for (const auto& q : nodes_) {
      const Matrix3d r = q.toRotationMatrix();
      worst = std::max(worst, (r.transpose() * r - Matrix3d::Identity()).norm());
    }
    return worst;
  }

 private:
  double length_ = 1.0;
  std::vector<Quaterniond> nodes_;
};

/// Piecewise-constant strain: axial vectors of A_i on each interval.
struct StrainCurve {
  double length = 1.0;
  std::vector<Vector3d> axial;

  int intervals() const { return static_cast<int>(axial.size()); }
  double step() const { return length / intervals(); }
  Matrix3d matrix(int i) const { return hat(axial[i]); }

  static StrainCurve constant(double length, int n, const Vector3d& v) {
    return {length, std::vector<Vector3d>(static_cast<std::size_t>(n), v)};
  }
};

/// R_{i+1} = R_i exp((L/N) A_i), renormalizing the quaternion each step.
inline FrameCurve frame_reconstruct(const StrainCurve& a, const Quaterniond& r0 = Quaterniond::Identity()) {
  if (a.intervals() < 2) throw Error(ErrorCode::invalid_parameter, "strain curve needs N >= 2");
  std::vector<Quaterniond> nodes(a.axial.size() + 1);
  nodes[0] = r0.normalized();
  const double dx = a.step();
  for (int i = 0; i < a.intervals(); ++i) {
    nodes[i + 1] = (nodes[i] * quat_exp(dx * a.axial[i])).normalized();
  }
  return FrameCurve(a.length, std::move(nodes));
}

inline FrameCurve frame_reconstruct(const StrainCurve& a, const Matrix3d& r0) {
  return frame_reconstruct(a, Quaterniond(r0));
}

/// A_i = (N/L) log(R_i^T R_{i+1}).
inline StrainCurve strain_of(const FrameCurve& frame) {
  StrainCurve s{frame.length(), std::vector<Vector3d>(frame.intervals())};
  const double inv = 1.0 / frame.step();
  const auto& q = frame.nodes();
  for (int i = 0; i < frame.intervals(); ++i) s.axial[i] = inv * quat_log(q[i].conjugate() * q[i + 1]);
  return s;
}

/// Q0 as a form on axial vectors: hat(v) has skew coordinates T v.
inline Matrix3d axial_stiffness(const Matrix3d& q0) {
  Matrix3d t;
  t << 0, 0, -1, 0, 1, 0, -1, 0, 0;
  return t.transpose() * q0 * t;
}

/// Q0(x1) in skew coordinates (A12, A13, A23), sampled along the rod.
struct RodStiffness {
  std::function<Matrix3d(double)> q0;

  static RodStiffness uniform(const Matrix3d& q0) {
    return {[q0](double) { return q0; }};
  }
  static RodStiffness uniform(const EffectiveStiffness& s) { return uniform(s.Q0); }

  std::vector<Matrix3d> axial_at_midpoints(double length, int n) const {
    std::vector<Matrix3d> k(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) k[i] = axial_stiffness(q0((i + 0.5) * length / n));
    return k;
  }
};

inline double rod_energy(const StrainCurve& a, const RodStiffness& stiff) {
  const auto k = stiff.axial_at_midpoints(a.length, a.intervals());
  double e = 0.0;
  for (int i = 0; i < a.intervals(); ++i) e += a.axial[i].dot(k[i] * a.axial[i]);
  return a.step() * e;
}

inline double rod_energy(const FrameCurve& frame, const RodStiffness& stiff) {
  return rod_energy(strain_of(frame), stiff);
}

// ---------------------------------------------------------------------------
// Minimization.

enum class EndCondition { clamped, moment };

struct RodBoundary {
  Quaterniond start = Quaterniond::Identity();  ///< always clamped
  EndCondition end = EndCondition::clamped;
  Quaterniond end_frame = Quaterniond::Identity();  ///< target when clamped
  Vector3d end_moment = Vector3d::Zero();           ///< spatial moment when free
};

struct RodOptions {
  int intervals = 64;
  int max_iterations = 100000;
  double gradient_tol = 1e-9;
  double decrease_tol = 1e-12;
  std::optional<FrameCurve> initial;
};

struct RodResult {
  FrameCurve frame;
  double energy = 0.0;       ///< total: elastic minus work of the end moment
  double elastic = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> energy_log;  ///< accepted iterates
  std::string stop_reason;

  bool monotone() const {
    for (std::size_t i = 1; i < energy_log.size(); ++i) {
      if (energy_log[i] > energy_log[i - 1]) return false;
    }
    return true;
  }
};

class RodConvergenceError : public Error {
 public:
  RodConvergenceError(const std::string& what, RodResult best)
      : Error(ErrorCode::convergence, what), best_(std::move(best)) {}
  const RodResult& best() const { return best_; }

 private:
  RodResult best_;
};

namespace detail {

class RodFunctional {
 public:
  RodFunctional(const RodStiffness& stiff, const RodBoundary& bc, double length, int n)
      : bc_(bc), length_(length), n_(n), k_(stiff.axial_at_midpoints(length, n)) {}

  bool end_free() const { return bc_.end == EndCondition::moment; }
  int free_nodes() const { return end_free() ? n_ : n_ - 1; }

  double elastic(const std::vector<Quaterniond>& q) const {
    double e = 0.0;
    for (int i = 0; i < n_; ++i) {
      const Vector3d phi = quat_log(q[i].conjugate() * q[i + 1]);
      e += phi.dot(k_[i] * phi);
    }
    return e / dx();
  }

  double work(const std::vector<Quaterniond>& q) const {
    if (!end_free()) return 0.0;
    return bc_.end_moment.dot(quat_log(q[n_] * bc_.end_frame.conjugate()));
  }

  double value(const std::vector<Quaterniond>& q) const { return elastic(q) - work(q); }

  /// Gradient in body coordinates: R_j -> R_j exp(hat(delta_j)), stacked
  /// over nodes 1..N (or 1..N-1 when the far end is clamped).
  VectorXd gradient(const std::vector<Quaterniond>& q) const {
    VectorXd g = VectorXd::Zero(3 * free_nodes());
    for (int i = 0; i < n_; ++i) {
      const Vector3d phi = quat_log(q[i].conjugate() * q[i + 1]);
      const Vector3d de = 2.0 / dx() * (k_[i] * phi);
      const Matrix3d jr = right_jacobian_inverse(phi);
      // Right end of interval i moves the increment on the right, left end
      // moves it on the left (inverse left Jacobian is jr^T).
      if (i + 1 <= free_nodes()) g.segment<3>(3 * i) += jr.transpose() * de;
      if (i >= 1) g.segment<3>(3 * (i - 1)) -= jr * de;
    }
    if (end_free()) {
      const Vector3d psi = quat_log(q[n_] * bc_.end_frame.conjugate());
      const Matrix3d rn = q[n_].toRotationMatrix();
      g.segment<3>(3 * (n_ - 1)) -= rn.transpose() * right_jacobian_inverse(psi) * bc_.end_moment;
    }
    return g;
  }

  std::vector<Quaterniond> retract(const std::vector<Quaterniond>& q, const VectorXd& d, double t) const {
    std::vector<Quaterniond> out = q;
    for (int j = 1; j <= free_nodes(); ++j) {
      out[j] = (q[j] * quat_exp(t * d.segment<3>(3 * (j - 1)))).normalized();
    }
    return out;
  }

 private:
  double dx() const { return length_ / n_; }

  RodBoundary bc_;
  double length_;
  int n_;
  std::vector<Matrix3d> k_;
};

/// Geodesic interpolation between the clamped ends, or constant start frame.
inline FrameCurve default_guess(const RodBoundary& bc, double length, int n) {
  std::vector<Quaterniond> nodes(static_cast<std::size_t>(n) + 1, bc.start.normalized());
  if (bc.end == EndCondition::clamped) {
    const Vector3d phi = quat_log(bc.start.conjugate() * bc.end_frame);
    for (int i = 0; i <= n; ++i) nodes[i] = (bc.start * quat_exp(phi * (double(i) / n))).normalized();
    nodes[n] = bc.end_frame.normalized();
  }
  return FrameCurve(length, std::move(nodes));
}

inline bool same_rotation(const Quaterniond& a, const Quaterniond& b) {
  return std::abs(std::abs(a.dot(b)) - 1.0) < 1e-12;
}

}  // namespace detail

/// Riemannian Polak-Ribiere conjugate gradient over per-node quaternions
/// with Armijo backtracking; boundary nodes stay fixed.
inline RodResult minimize_rod(const RodStiffness& stiff, const RodBoundary& bc, double length,
                              const RodOptions& options = {}) {
  if (!(length > 0)) throw Error(ErrorCode::invalid_parameter, "rod length must be positive");
  FrameCurve frame = options.initial ? *options.initial : detail::default_guess(bc, length, options.intervals);
  const int n = frame.intervals();
  if (n < 16) throw Error(ErrorCode::invalid_parameter, "rod minimization needs N >= 16");
  if (std::abs(frame.length() - length) > 1e-12 * length) {
    throw Error(ErrorCode::invalid_input, "initial frame length differs from the rod length");
  }
  if (!detail::same_rotation(frame.nodes()[0], bc.start) ||
      (bc.end == EndCondition::clamped && !detail::same_rotation(frame.nodes()[n], bc.end_frame))) {
    throw Error(ErrorCode::invalid_input, "initial frame violates the clamped boundary data");
  }

  const detail::RodFunctional f(stiff, bc, length, n);
  std::vector<Quaterniond> q = frame.nodes();
  RodResult res;
  double e = f.value(q);
  res.energy_log.push_back(e);
  VectorXd g = f.gradient(q);
  VectorXd d = -g;
  double step = 1.0 / std::max(1.0, d.norm());

  auto finish = [&](const std::string& reason) {
    res.frame = FrameCurve(length, q);
    res.energy = e;
    res.elastic = f.elastic(q);
    res.gradient_norm = g.norm();
    res.stop_reason = reason;
    return res;
  };

  for (int it = 0; it < options.max_iterations; ++it) {
    if (g.size() == 0 || g.norm() < options.gradient_tol) return finish("gradient");
    double slope = g.dot(d);
    if (slope >= 0) {
      d = -g;
      slope = -g.squaredNorm();
    }
    double t = step;
    std::vector<Quaterniond> trial;
    double et = 0.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      try {
        trial = f.retract(q, d, t);
        et = f.value(trial);
        if (et <= e + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
      } catch (const Error&) {
        // increment angle reached pi; shrink
      }
      t *= 0.5;
    }
    if (!accepted) return finish("line search stalled");
    const double decrease = e - et;
    q = std::move(trial);
    e = et;
    res.energy_log.push_back(e);
    res.iterations = it + 1;
    const VectorXd gn = f.gradient(q);
    const double beta = std::max(0.0, gn.dot(gn - g) / g.squaredNorm());
    d = -gn + beta * d;
    g = gn;
    step = std::min(2.0 * t, 1e3 * t + 1.0);
    if (decrease < options.decrease_tol * std::abs(e)) return finish("energy decrease");
  }
  finish("iteration cap");
  throw RodConvergenceError("rod minimization did not converge within " +
                                std::to_string(options.max_iterations) + " iterations",
                            res);
}

}  // namespace rodhom
