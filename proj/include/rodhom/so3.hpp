#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>

#include "rodhom/error.hpp"

namespace rodhom {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

/// Cross-product matrix: hat(v) x = v x x.
inline Matrix3d hat(const Vector3d& v) {
  Matrix3d s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// Axial vector (A32, A13, A21) of a skew matrix.
inline Vector3d axl(const Matrix3d& s, double tol = 1e-10) {
  if ((s + s.transpose()).norm() > tol * std::max(1.0, s.norm())) {
    throw Error(ErrorCode::invalid_input, "axl expects a skew-symmetric matrix");
  }
  return {s(2, 1), s(0, 2), s(1, 0)};
}

inline Matrix3d sym(const Matrix3d& g) { return 0.5 * (g + g.transpose()); }
inline Matrix3d skw(const Matrix3d& g) { return 0.5 * (g - g.transpose()); }

/// Rotation exp(hat(v)) by Rodrigues' formula.
inline Matrix3d rodrigues(const Vector3d& v) {
  const double theta = v.norm();
  const Matrix3d k = hat(v);
  if (theta < 1e-8) return Matrix3d::Identity() + k + 0.5 * k * k;
  return Matrix3d::Identity() + std::sin(theta) / theta * k +
         (1.0 - std::cos(theta)) / (theta * theta) * k * k;
}

inline Quaterniond quat_exp(const Vector3d& v) {
  const double theta = v.norm();
  if (theta < 1e-12) {
    Quaterniond q(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z());
    return q.normalized();
  }
  const Vector3d axis = v / theta;
  return Quaterniond(Eigen::AngleAxisd(theta, axis));
}

/// Principal logarithm as a rotation vector. Angles at or beyond pi - 1e-9
/// are ambiguous and rejected.
inline Vector3d quat_log(Quaterniond q) {
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const Vector3d im = q.vec();
  const double s = im.norm();
  const double angle = 2.0 * std::atan2(s, q.w());
  if (angle >= M_PI - 1e-9) {
    throw Error(ErrorCode::resolution, "rotation increment too close to pi for a unique logarithm");
  }
  if (s < 1e-12) return 2.0 * im / q.w();
  return angle / s * im;
}

inline Vector3d rotation_log(const Matrix3d& r) { return quat_log(Quaterniond(r)); }

/// Right Jacobian inverse of the exponential on so(3).
inline Matrix3d right_jacobian_inverse(const Vector3d& phi) {
  const double theta = phi.norm();
  const Matrix3d p = hat(phi);
  if (theta < 1e-6) return Matrix3d::Identity() + 0.5 * p + p * p / 12.0;
  const double c = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Matrix3d::Identity() + 0.5 * p + c * p * p;
}

/// Left Jacobian: d/dt of integral_0^1 exp(s hat(phi)) ds phi.
inline Matrix3d left_jacobian(const Vector3d& phi) {
  const double theta = phi.norm();
  const Matrix3d p = hat(phi);
  if (theta < 1e-6) return Matrix3d::Identity() + 0.5 * p + p * p / 6.0;
  return Matrix3d::Identity() + (1.0 - std::cos(theta)) / (theta * theta) * p +
         (theta - std::sin(theta)) / (theta * theta * theta) * p * p;
}

/// Nearest rotation in Frobenius norm (polar factor with det +1).
inline Matrix3d nearest_rotation(const Matrix3d& f) {
  Eigen::JacobiSVD<Matrix3d> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d u = svd.matrixU();
  const Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

/// Squared Frobenius distance to SO(3).
inline double dist2_so3(const Matrix3d& f) {
  Eigen::JacobiSVD<Matrix3d> svd(f);
  Vector3d s = svd.singularValues();
  if (f.determinant() < 0) s.z() = -s.z();
  return (s.array() - 1.0).square().sum();
}

/// Random rotation, uniform over SO(3), from three uniforms in [0,1).
inline Matrix3d rotation_from_uniforms(double u1, double u2, double u3) {
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  Quaterniond q(a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2),
                b * std::sin(2 * M_PI * u3), b * std::cos(2 * M_PI * u3));
  return q.normalized().toRotationMatrix();
}

}  // namespace rodhom
