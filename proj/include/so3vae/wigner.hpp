#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "so3vae/rng.hpp"
#include "so3vae/so3.hpp"

namespace so3vae {

inline constexpr int kMaxWignerDegree = 6;

struct RepBlock {
  int degree = 0;
  int multiplicity = 1;
};

/// Block-diagonal real representation: `multiplicity` copies of D^degree per block.
struct RepSpec {
  std::vector<RepBlock> blocks;

  /// Degrees 0..max_degree, each repeated `multiplicity` times.
  static RepSpec up_to(int max_degree, int multiplicity) {
    RepSpec s;
    for (int l = 0; l <= max_degree; ++l) s.blocks.push_back({l, multiplicity});
    s.validate();
    return s;
  }

  int total_dim() const {
    int n = 0;
    for (const auto& b : blocks) n += b.multiplicity * (2 * b.degree + 1);
    return n;
  }

  int max_degree() const { return blocks.empty() ? 0 : blocks.back().degree; }

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("RepSpec: no blocks");
    int prev = -1;
    for (const auto& b : blocks) {
      if (b.degree <= prev) throw std::invalid_argument("RepSpec: degrees must be strictly ascending");
      if (b.degree > kMaxWignerDegree) throw std::invalid_argument("RepSpec: degree above 6");
      if (b.multiplicity < 1) throw std::invalid_argument("RepSpec: multiplicity must be positive");
      prev = b.degree;
    }
  }
};

namespace detail {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Wigner small-d, d^l_{m'm}(beta), explicit factorial sum.
inline double wigner_small_d(int l, int mp, int m, double beta) {
  const double c = std::cos(0.5 * beta);
  const double s = std::sin(0.5 * beta);
  const double pref = std::sqrt(factorial(l + mp) * factorial(l - mp) * factorial(l + m) * factorial(l - m));
  double sum = 0.0;
  const int k_lo = std::max(0, m - mp);
  const int k_hi = std::min(l + m, l - mp);
  for (int k = k_lo; k <= k_hi; ++k) {
    const double den = factorial(l + m - k) * factorial(k) * factorial(mp - m + k) * factorial(l - mp - k);
    const double sign = ((mp - m + k) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * std::pow(c, 2 * l + m - mp - 2 * k) * std::pow(s, mp - m + 2 * k) / den;
  }
  return pref * sum;
}

// Unitary change of basis taking complex spherical harmonics (Condon-Shortley
// phase, index m + l) to the real ones ordered m = -l..l.
inline Eigen::MatrixXcd complex_to_real(int l) {
  const int n = 2 * l + 1;
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, n);
  const double h = 1.0 / std::sqrt(2.0);
  const std::complex<double> i(0.0, 1.0);
  u(l, l) = 1.0;
  for (int m = 1; m <= l; ++m) {
    const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
    u(l + m, l - m) = h;
    u(l + m, l + m) = sgn * h;
    u(l - m, l - m) = i * h;
    u(l - m, l + m) = -sgn * i * h;
  }
  return u;
}

inline double sh_norm(int l, int am) {
  return std::sqrt((2 * l + 1) / (4.0 * kPi) * factorial(l - am) / factorial(l + am));
}

}  // namespace detail

/// Real spherical harmonics of degrees 0..max_degree at a unit vector,
/// ordered (l, m) with m = -l..l inside each degree. Polynomial in (x, y, z),
/// so it accepts dual-number scalars.
template <typename T>
std::vector<T> real_spherical_harmonics(int max_degree, const Vec3<T>& p) {
  const int n_l = max_degree + 1;
  std::vector<T> out(static_cast<std::size_t>(n_l * n_l), T(0));
  const T x = p(0), y = p(1), z = p(2);

  // Re/Im of (x + i y)^m.
  std::vector<T> cr(n_l), ci(n_l);
  cr[0] = T(1);
  ci[0] = T(0);
  for (int m = 1; m < n_l; ++m) {
    cr[m] = cr[m - 1] * x - ci[m - 1] * y;
    ci[m] = cr[m - 1] * y + ci[m - 1] * x;
  }

  // Q[l][m] = P_l^m(z) / (1 - z^2)^{m/2} without the Condon-Shortley phase.
  std::vector<std::vector<T>> q(n_l, std::vector<T>(n_l, T(0)));
  for (int m = 0; m < n_l; ++m) {
    double dfact = 1.0;
    for (int k = 2 * m - 1; k > 1; k -= 2) dfact *= k;
    q[m][m] = T(dfact);
    if (m + 1 < n_l) q[m + 1][m] = T(2 * m + 1) * z * q[m][m];
    for (int l = m + 2; l < n_l; ++l) {
      q[l][m] = (T(2 * l - 1) * z * q[l - 1][m] - T(l + m - 1) * q[l - 2][m]) / T(l - m);
    }
  }

  const double root2 = std::sqrt(2.0);
  for (int l = 0; l < n_l; ++l) {
    const int base = l * l + l;
    out[base] = T(detail::sh_norm(l, 0)) * q[l][0];
    for (int m = 1; m <= l; ++m) {
      const T a = T(root2 * detail::sh_norm(l, m)) * q[l][m];
      out[base + m] = a * cr[m];
      out[base - m] = a * ci[m];
    }
  }
  return out;
}

/// Real-basis Wigner-D block D^l(R), defined by Y_l(R p) = D^l(R) Y_l(p).
///
/// Evaluated through the ZYZ angles of R, the small-d factorial sum and a
/// conjugation by the complex-to-real harmonic basis change.
inline Eigen::MatrixXd wigner_d(int l, const Rotation& r) {
  if (l < 0 || l > kMaxWignerDegree) throw std::invalid_argument("wigner_d: degree out of range");
  const int n = 2 * l + 1;
  const EulerZYZ e = rotation_to_euler_zyz(r);
  Eigen::MatrixXcd dc(n, n);
  for (int mp = -l; mp <= l; ++mp) {
    for (int m = -l; m <= l; ++m) {
      // conj(D^l_{m'm}) with D^l_{m'm} = e^{-i m' alpha} d^l_{m'm}(beta) e^{-i m gamma}
      dc(mp + l, m + l) = std::polar(detail::wigner_small_d(l, mp, m, e.beta), mp * e.alpha + m * e.gamma);
    }
  }
  const Eigen::MatrixXcd u = detail::complex_to_real(l);
  return (u * dc * u.adjoint()).real();
}

/// Block-diagonal stack of the representation for every block of `spec`.
inline Eigen::MatrixXd rep_matrix(const RepSpec& spec, const Rotation& r) {
  const int dim = spec.total_dim();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, dim);
  int off = 0;
  for (const auto& b : spec.blocks) {
    const Eigen::MatrixXd d = wigner_d(b.degree, r);
    const int n = 2 * b.degree + 1;
    for (int c = 0; c < b.multiplicity; ++c) {
      w.block(off, off, n, n) = d;
      off += n;
    }
  }
  return w;
}

/// Group action on a Fourier-mode vector: rep_matrix(spec, R) * f.
inline Eigen::VectorXd act(const RepSpec& spec, const Rotation& r, const Eigen::VectorXd& f) {
  if (f.size() != spec.total_dim()) throw std::invalid_argument("act: dimension mismatch");
  Eigen::VectorXd out(f.size());
  int off = 0;
  for (const auto& b : spec.blocks) {
    const Eigen::MatrixXd d = wigner_d(b.degree, r);
    const int n = 2 * b.degree + 1;
    for (int c = 0; c < b.multiplicity; ++c) {
      out.segment(off, n) = d * f.segment(off, n);
      off += n;
    }
  }
  return out;
}

/// Wigner blocks as polynomials in the entries of R, usable with dual-number
/// scalars. Each block is recovered from harmonics at a fixed point set:
/// D^l(R) = Y_l(R P) G_l with G_l the right pseudo-inverse of Y_l(P).
class HarmonicRepresentation {
 public:
  explicit HarmonicRepresentation(int max_degree) : max_degree_(max_degree) {
    if (max_degree < 0 || max_degree > kMaxWignerDegree) {
      throw std::invalid_argument("HarmonicRepresentation: degree out of range");
    }
    // Fibonacci lattice; 2(2L+1) + 2 generic points give full row rank per degree.
    const int n_pts = 2 * (2 * max_degree + 1) + 2;
    points_.resize(3, n_pts);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n_pts; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / n_pts;
      const double rad = std::sqrt(1.0 - z * z);
      points_.col(i) << rad * std::cos(golden * i), rad * std::sin(golden * i), z;
    }
    for (int l = 0; l <= max_degree; ++l) {
      Eigen::MatrixXd y(2 * l + 1, n_pts);
      for (int i = 0; i < n_pts; ++i) {
        const auto h = real_spherical_harmonics<double>(max_degree, points_.col(i));
        for (int m = 0; m < 2 * l + 1; ++m) y(m, i) = h[l * l + m];
      }
      pinv_.push_back(y.transpose() * (y * y.transpose()).inverse());
    }
  }

  int max_degree() const { return max_degree_; }

  /// All blocks D^0..D^L at R.
  template <typename T>
  std::vector<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>> blocks(const Mat3<T>& r) const {
    const int n_pts = static_cast<int>(points_.cols());
    std::vector<std::vector<T>> harm(n_pts);
    for (int i = 0; i < n_pts; ++i) {
      const Vec3<T> p = r * points_.col(i).cast<T>();
      harm[i] = real_spherical_harmonics<T>(max_degree_, p);
    }
    std::vector<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>> out;
    for (int l = 0; l <= max_degree_; ++l) {
      const int n = 2 * l + 1;
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> y(n, n_pts);
      for (int i = 0; i < n_pts; ++i) {
        for (int m = 0; m < n; ++m) y(m, i) = harm[i][l * l + m];
      }
      out.push_back(y * pinv_[l].cast<T>());
    }
    return out;
  }

  /// Block-diagonal action of `spec` on f, for any scalar type.
  template <typename T>
  Eigen::Matrix<T, Eigen::Dynamic, 1> act(const RepSpec& spec, const Mat3<T>& r,
                                          const Eigen::Matrix<T, Eigen::Dynamic, 1>& f) const {
    const auto d = blocks<T>(r);
    Eigen::Matrix<T, Eigen::Dynamic, 1> out(f.size());
    int off = 0;
    for (const auto& b : spec.blocks) {
      const int n = 2 * b.degree + 1;
      for (int c = 0; c < b.multiplicity; ++c) {
        out.segment(off, n) = d[b.degree] * f.segment(off, n);
        off += n;
      }
    }
    return out;
  }

 private:
  int max_degree_;
  Eigen::Matrix3Xd points_;
  std::vector<Eigen::MatrixXd> pinv_;
};

struct DataPoint {
  Eigen::VectorXd x;
  Rotation r_true;
};

/// Content vector v ~ N(0, I) of dimension spec.total_dim(), from its own seed.
inline Eigen::VectorXd make_content(const RepSpec& spec, std::uint64_t content_seed) {
  Rng rng(content_seed);
  Eigen::VectorXd v(spec.total_dim());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v;
}

/// n pairs (W(R_i) v, R_i) with R_i Haar-uniform and v fixed by content_seed.
inline std::vector<DataPoint> make_toy_dataset(const RepSpec& spec, std::uint64_t content_seed, long n,
                                               Rng& rng) {
  if (n < 1) throw std::invalid_argument("make_toy_dataset: n must be >= 1");
  spec.validate();
  const Eigen::VectorXd v = make_content(spec, content_seed);
  std::vector<DataPoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const Rotation r = sample_uniform(rng);
    out.push_back({act(spec, r, v), r});
  }
  return out;
}

/// Orbit of v under the one-parameter subgroup exp(t axis), t = 2 pi i / n_steps,
/// for i = 0..n_steps (the last point closes the loop).
inline std::vector<DataPoint> make_s1_trajectory(const RepSpec& spec, const Eigen::VectorXd& content,
                                                 const Eigen::Vector3d& axis, int n_steps) {
  if (n_steps < 4) throw std::invalid_argument("make_s1_trajectory: n_steps must be >= 4");
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw std::invalid_argument("make_s1_trajectory: axis not unit");
  std::vector<DataPoint> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  for (int i = 0; i <= n_steps; ++i) {
    const Rotation r = exp_map<double>(axis * (kTwoPi * i / n_steps));
    out.push_back({act(spec, r, content), r});
  }
  return out;
}

}  // namespace so3vae
