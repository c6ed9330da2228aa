#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "so3vae/rng.hpp"

namespace so3vae {

template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

/// Group element: 3x3 orthonormal matrix with determinant +1.
using Rotation = Eigen::Matrix3d;
/// Element of so(3) written in the (L1, L2, L3) basis; norm is the angle.
using AlgebraVector = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct UnitQuaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  UnitQuaternion operator-() const { return {-w, -x, -y, -z}; }
};

inline UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

/// ZYZ Euler angles, R = Rz(alpha) Ry(beta) Rz(gamma).
struct EulerZYZ {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
};

inline bool is_rotation(const Rotation& m, double tol = 1e-9) {
  if (!m.allFinite()) return false;
  const double ortho = (m.transpose() * m - Rotation::Identity()).norm();
  return ortho < tol && std::abs(m.determinant() - 1.0) <= tol;
}

template <typename T>
Mat3<T> hat(const Vec3<T>& v) {
  Mat3<T> m;
  const T zero(0);
  m << zero, -v(2), v(1),
       v(2), zero, -v(0),
       -v(1), v(0), zero;
  return m;
}

template <typename T>
Vec3<T> vee(const Mat3<T>& m) {
  return Vec3<T>(m(2, 1), m(0, 2), m(1, 0));
}

/// Rodrigues formula. Below 1e-6 rad the second-order series is used so that
/// the map (and its derivative, for dual-number scalars) stays finite at 0.
template <typename T>
Mat3<T> exp_map(const Vec3<T>& v) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Mat3<T> k = hat(v);
  const Mat3<T> k2 = k * k;
  const T theta2 = v.squaredNorm();
  if (theta2 < T(1e-12)) {
    return Mat3<T>::Identity() + k + T(0.5) * k2;
  }
  const T theta = sqrt(theta2);
  return Mat3<T>::Identity() + (sin(theta) / theta) * k + ((T(1) - cos(theta)) / theta2) * k2;
}

/// Rotation angle in [0, pi] from the trace; the arccos argument is clamped.
inline double theta_of(const Rotation& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

/// Principal logarithm; result norm lies in [0, pi].
///
/// Near the identity the factor theta / (2 sin theta) is replaced by its
/// series. Near pi the axis comes from the symmetric part (R + R^T)/2, whose
/// dominant direction is the rotation axis; its sign follows the skew part,
/// or the largest-magnitude component is made positive when the skew part
/// vanishes (exact half turns).
inline AlgebraVector log_map(const Rotation& r) {
  const Eigen::Vector3d skew = vee<double>(r - r.transpose());  // 2 sin(theta) u
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double s = 0.5 * skew.norm();
  const double theta = std::atan2(s, c);

  if (theta < 1e-4) {
    const double t2 = theta * theta;
    return (0.5 + t2 / 12.0 + 7.0 * t2 * t2 / 720.0) * skew;
  }
  if (theta < kPi - 1e-2) {
    return (theta / (2.0 * std::sin(theta))) * skew;
  }

  const Eigen::Matrix3d sym = 0.5 * (r + r.transpose());
  const Eigen::Matrix3d uut = (sym - c * Eigen::Matrix3d::Identity()) / (1.0 - c);
  Eigen::Index j = 0;
  uut.diagonal().maxCoeff(&j);
  Eigen::Vector3d axis = uut.col(j) / std::sqrt(std::max(uut(j, j), 1e-300));
  axis.normalize();
  const double d = axis.dot(skew);
  if (std::abs(d) > 1e-12) {
    if (d < 0.0) axis = -axis;
  } else {
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis(big) < 0.0) axis = -axis;
  }
  return theta * axis;
}

/// Covering map S^3 -> SO(3) without the unit-norm check; used by the
/// differentiable heads after their own normalization.
template <typename T>
Mat3<T> quat_to_matrix(const T& w, const T& x, const T& y, const T& z) {
  Mat3<T> m;
  const T one(1), two(2);
  m << one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y),
       two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x),
       two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y);
  return m;
}

inline Rotation quat_to_rotation(const UnitQuaternion& q) {
  if (std::abs(q.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("quat_to_rotation: quaternion is not unit norm");
  }
  return quat_to_matrix(q.w, q.x, q.y, q.z);
}

/// Inverse of the covering map, choosing the representative with w >= 0.
inline UnitQuaternion rotation_to_quat(const Rotation& r) {
  // Shepperd's method: pivot on the largest of (trace, diagonal).
  const double tr = r.trace();
  UnitQuaternion q;
  if (tr >= r(0, 0) && tr >= r(1, 1) && tr >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  } else if (r(1, 1) >= r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 - r(0, 0) + r(1, 1) - r(2, 2));
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 - r(0, 0) - r(1, 1) + r(2, 2));
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  if (q.w < 0.0) q = -q;
  const double n = q.norm();
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

template <typename T>
Mat3<T> rot_z(const T& a) {
  using std::cos;
  using std::sin;
  Mat3<T> m;
  const T c = cos(a), s = sin(a), zero(0), one(1);
  m << c, -s, zero, s, c, zero, zero, zero, one;
  return m;
}

template <typename T>
Mat3<T> rot_y(const T& b) {
  using std::cos;
  using std::sin;
  Mat3<T> m;
  const T c = cos(b), s = sin(b), zero(0), one(1);
  m << c, zero, s, zero, one, zero, -s, zero, c;
  return m;
}

template <typename T>
Mat3<T> euler_zyz_matrix(const T& alpha, const T& beta, const T& gamma) {
  return rot_z(alpha) * rot_y(beta) * rot_z(gamma);
}

inline Rotation euler_zyz_to_rotation(const EulerZYZ& e) {
  return euler_zyz_matrix(e.alpha, e.beta, e.gamma);
}

/// ZYZ decomposition with beta in [0, pi]. At the gimbal poles gamma is set to 0.
inline EulerZYZ rotation_to_euler_zyz(const Rotation& r) {
  EulerZYZ e;
  const double sb = std::hypot(r(0, 2), r(1, 2));
  e.beta = std::atan2(sb, r(2, 2));
  if (sb > 1e-12) {
    e.alpha = std::atan2(r(1, 2), r(0, 2));
    e.gamma = std::atan2(r(2, 1), -r(2, 0));
  } else if (r(2, 2) > 0.0) {
    e.alpha = std::atan2(r(1, 0), r(0, 0));
    e.gamma = 0.0;
  } else {
    e.alpha = std::atan2(-r(0, 1), r(1, 1));
    e.gamma = 0.0;
  }
  return e;
}

/// Haar-uniform rotation: normalized 4-d Gaussian pushed through the cover.
inline Rotation sample_uniform(Rng& rng) {
  for (;;) {
    const double w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n < 1e-12) continue;
    return quat_to_matrix(w / n, x / n, y / n, z / n);
  }
}

inline double frobenius_distance(const Rotation& a, const Rotation& b) { return (a - b).norm(); }

}  // namespace so3vae
