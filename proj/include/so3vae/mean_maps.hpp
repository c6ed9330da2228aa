#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "so3vae/so3.hpp"

namespace so3vae {

/// Encoder mean heads: a fixed map from raw network output to SO(3).
enum class HeadKind { Algebra, Quaternion, S2S1, S2S2 };

inline HeadKind parse_head_kind(std::string_view token) {
  if (token == "alg") return HeadKind::Algebra;
  if (token == "q") return HeadKind::Quaternion;
  if (token == "s2s1") return HeadKind::S2S1;
  if (token == "s2s2") return HeadKind::S2S2;
  throw std::invalid_argument("unknown head kind: " + std::string(token));
}

inline std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Algebra: return "alg";
    case HeadKind::Quaternion: return "q";
    case HeadKind::S2S1: return "s2s1";
    case HeadKind::S2S2: return "s2s2";
  }
  return "?";
}

inline constexpr int head_input_dim(HeadKind k) {
  switch (k) {
    case HeadKind::Algebra: return 3;
    case HeadKind::Quaternion: return 4;
    case HeadKind::S2S1: return 5;
    case HeadKind::S2S2: return 6;
  }
  return 0;
}

inline constexpr double kMinHeadNorm = 1e-12;
inline constexpr double kMinS2S2Angle = 1e-6;

namespace detail {

template <typename T>
T checked_norm(const T& sq, const char* what) {
  using std::sqrt;
  if (!(sq > T(kMinHeadNorm * kMinHeadNorm))) {
    throw std::domain_error(std::string(what) + ": input norm below 1e-12");
  }
  return sqrt(sq);
}

}  // namespace detail

template <typename T>
Mat3<T> head_algebra(const Vec3<T>& x) {
  return exp_map<T>(x);
}

template <typename T>
Mat3<T> head_quaternion(const Eigen::Matrix<T, 4, 1>& x) {
  const T n = detail::checked_norm(x.squaredNorm(), "head_quaternion");
  return quat_to_matrix<T>(x(0) / n, x(1) / n, x(2) / n, x(3) / n);
}

/// Axis in S^2 and angle in S^1: I + sin u_x + (1 - cos) u_x^2 with
/// (cos, sin) = y / |y|.
template <typename T>
Mat3<T> head_s2s1(const Vec3<T>& x, const Eigen::Matrix<T, 2, 1>& y) {
  const T nx = detail::checked_norm(x.squaredNorm(), "head_s2s1 axis");
  const T ny = detail::checked_norm(y.squaredNorm(), "head_s2s1 angle");
  const Mat3<T> k = hat<T>(x / nx);
  const T c = y(0) / ny;
  const T s = y(1) / ny;
  return Mat3<T>::Identity() + s * k + (T(1) - c) * (k * k);
}

/// Gram-Schmidt frame; the rows of the result are (w1, w2, w1 x w2).
template <typename T>
Mat3<T> head_s2s2(const Vec3<T>& x, const Vec3<T>& y) {
  using std::abs;
  using std::sqrt;
  const T nx = detail::checked_norm(x.squaredNorm(), "head_s2s2 first");
  const T ny = detail::checked_norm(y.squaredNorm(), "head_s2s2 second");
  const Vec3<T> w1 = x / nx;
  const Vec3<T> yn = y / ny;
  const Vec3<T> w2p = yn - w1.dot(yn) * w1;
  // |w2p| = sin(angle between x and y)
  const T s2 = w2p.squaredNorm();
  if (!(s2 > T(kMinS2S2Angle * kMinS2S2Angle))) {
    throw std::domain_error("head_s2s2: inputs are (nearly) parallel");
  }
  const Vec3<T> w2 = w2p / sqrt(s2);
  const Vec3<T> w3 = w1.cross(w2);
  Mat3<T> m;
  m.row(0) = w1.transpose();
  m.row(1) = w2.transpose();
  m.row(2) = w3.transpose();
  return m;
}

/// Dispatch on a raw head block of length head_input_dim(kind).
template <typename T>
Mat3<T> apply_head(HeadKind kind, std::span<const T> raw) {
  if (static_cast<int>(raw.size()) != head_input_dim(kind)) {
    throw std::invalid_argument("apply_head: raw input has wrong dimension for " + to_string(kind));
  }
  switch (kind) {
    case HeadKind::Algebra:
      return head_algebra<T>(Vec3<T>(raw[0], raw[1], raw[2]));
    case HeadKind::Quaternion:
      return head_quaternion<T>(Eigen::Matrix<T, 4, 1>(raw[0], raw[1], raw[2], raw[3]));
    case HeadKind::S2S1:
      return head_s2s1<T>(Vec3<T>(raw[0], raw[1], raw[2]), Eigen::Matrix<T, 2, 1>(raw[3], raw[4]));
    case HeadKind::S2S2:
      return head_s2s2<T>(Vec3<T>(raw[0], raw[1], raw[2]), Vec3<T>(raw[3], raw[4], raw[5]));
  }
  throw std::logic_error("apply_head: unreachable");
}

/// The normalizer phi: raw network output -> head domain (R^3, S^3, S^2 x S^1,
/// S^2 x S^2). apply_head(kind, phi(raw)) == apply_head(kind, raw).
inline Eigen::VectorXd head_normalize(HeadKind kind, const Eigen::VectorXd& raw) {
  if (raw.size() != head_input_dim(kind)) {
    throw std::invalid_argument("head_normalize: raw input has wrong dimension for " + to_string(kind));
  }
  Eigen::VectorXd out = raw;
  auto unit = [&](Eigen::Index at, Eigen::Index n, const char* what) {
    out.segment(at, n) /= detail::checked_norm(raw.segment(at, n).squaredNorm(), what);
  };
  switch (kind) {
    case HeadKind::Algebra:
      break;
    case HeadKind::Quaternion:
      unit(0, 4, "head_normalize q");
      break;
    case HeadKind::S2S1:
      unit(0, 3, "head_normalize s2s1 axis");
      unit(3, 2, "head_normalize s2s1 angle");
      break;
    case HeadKind::S2S2:
      unit(0, 3, "head_normalize s2s2 first");
      unit(3, 3, "head_normalize s2s2 second");
      break;
  }
  return out;
}

/// Continuous right inverse of head_s2s2: the first two rows.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> embed_s2s2(const Rotation& r) {
  return {r.row(0).transpose(), r.row(1).transpose()};
}

/// A raw head input that maps back to `r`. Only the s2s2 preimage is continuous
/// in r; the others jump across the log branch cut or the quaternion sign.
inline Eigen::VectorXd head_preimage(HeadKind kind, const Rotation& r) {
  Eigen::VectorXd out(head_input_dim(kind));
  switch (kind) {
    case HeadKind::Algebra:
      out = log_map(r);
      break;
    case HeadKind::Quaternion: {
      const UnitQuaternion q = rotation_to_quat(r);
      out << q.w, q.x, q.y, q.z;
      break;
    }
    case HeadKind::S2S1: {
      const AlgebraVector v = log_map(r);
      const double theta = v.norm();
      const Eigen::Vector3d axis = theta > 0.0 ? Eigen::Vector3d(v / theta) : Eigen::Vector3d::UnitZ();
      out << axis, std::cos(theta), std::sin(theta);
      break;
    }
    case HeadKind::S2S2: {
      const auto [a, b] = embed_s2s2(r);
      out << a, b;
      break;
    }
  }
  return out;
}

}  // namespace so3vae
