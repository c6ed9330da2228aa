#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "so3vae/so3.hpp"

namespace so3vae {

/// log(8 pi^2): volume of SO(3) under the Euler-angle measure.
inline const double kLogHaarVolume = std::log(8.0 * kPi * kPi);

/// Measure the reported densities and entropies refer to.
///
/// `Normalized` is the probability Haar measure (uniform density 1).
/// `Euler8Pi2` is Haar with total volume 8 pi^2, under which the uniform prior
/// has density 1 / (8 pi^2).
enum class HaarConvention { Normalized, Euler8Pi2 };

inline HaarConvention parse_haar_convention(std::string_view s) {
  if (s == "normalized") return HaarConvention::Normalized;
  if (s == "euler8pi2") return HaarConvention::Euler8Pi2;
  throw std::invalid_argument("unknown haar convention: " + std::string(s));
}

inline std::string to_string(HaarConvention c) {
  return c == HaarConvention::Normalized ? "normalized" : "euler8pi2";
}

inline double cross_entropy_uniform(HaarConvention c) {
  return c == HaarConvention::Normalized ? 0.0 : kLogHaarVolume;
}

struct DensityTruncation {
  int k_max = 5;

  void validate() const {
    if (k_max < 1) throw std::invalid_argument("DensityTruncation: k_max must be >= 1");
  }
};

/// Concentrated distribution on SO(3): R = r_mu * exp(v), v ~ N(0, diag(sigma^2)).
struct So3Gaussian {
  Rotation r_mu = Rotation::Identity();
  Eigen::Vector3d sigma = Eigen::Vector3d::Ones();

  void validate() const {
    if (!sigma.allFinite() || (sigma.array() <= 0.0).any()) {
      throw std::invalid_argument("So3Gaussian: sigma must be positive and finite");
    }
    if (!is_rotation(r_mu)) throw std::invalid_argument("So3Gaussian: r_mu is not a rotation");
  }
};

/// log N(w | 0, diag(sigma^2)).
template <typename T>
T log_normal_diag(const Vec3<T>& w, const Vec3<T>& sigma) {
  using std::log;
  T acc(-1.5 * std::log(kTwoPi));
  for (int i = 0; i < 3; ++i) {
    const T z = w(i) / sigma(i);
    acc -= T(0.5) * z * z + log(sigma(i));
  }
  return acc;
}

/// log of the pushforward density at exp(v), w.r.t. normalized Haar measure,
/// evaluated from the algebra vector itself:
///
///   8 pi^2 * sum_k r(v/|v| (|v| + 2k pi)) (|v| + 2k pi)^2 / (2 - 2 cos|v|)
///
/// summed over k in [-k_max, k_max] in log space. `v` need not lie in the
/// principal ball; every preimage of exp(v) is of the form v/|v| (|v| + 2k pi).
/// Requires exp(v) away from the identity (|v| not near a multiple of 2 pi).
template <typename T>
T log_pushforward_density(const Vec3<T>& v, const Vec3<T>& sigma, int k_max) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  const T t = sqrt(v.squaredNorm());
  const Vec3<T> u = v / t;
  // 2 - 2 cos t = 4 sin^2(t/2)
  const T log_jac_den = T(2) * log(T(2) * abs(sin(T(0.5) * t)));

  std::vector<T> terms;
  terms.reserve(2 * static_cast<std::size_t>(k_max) + 1);
  for (int k = -k_max; k <= k_max; ++k) {
    const T s = t + T(kTwoPi * k);
    const T s2 = s * s;
    terms.push_back(log_normal_diag<T>(u * s, sigma) + log(s2) - log_jac_den);
  }
  T m = terms.front();
  for (const T& x : terms) {
    if (x > m) m = x;
  }
  T acc(0);
  for (const T& x : terms) acc += exp(x - m);
  return m + log(acc) + T(kLogHaarVolume);
}

/// Draw R_z = r_mu exp(v). The algebra sample v is returned as well, since
/// entropy estimates only need v.
inline std::pair<Rotation, AlgebraVector> sample(const So3Gaussian& d, Rng& rng) {
  AlgebraVector v;
  for (int i = 0; i < 3; ++i) v(i) = d.sigma(i) * rng.normal();
  return {d.r_mu * exp_map<double>(v), v};
}

/// log q(R | r_mu, sigma) = log qhat(r_mu^T R | sigma) w.r.t. normalized Haar.
///
/// Returns nullopt when r_mu^T R is within 1e-8 rad of the identity, where the
/// density is singular.
inline std::optional<double> log_density(const So3Gaussian& d, const Rotation& r,
                                         const DensityTruncation& trunc = {}) {
  const AlgebraVector w = log_map(d.r_mu.transpose() * r);
  if (w.norm() <= 1e-8) return std::nullopt;
  return log_pushforward_density<double>(w, d.sigma, trunc.k_max);
}

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Monte Carlo entropy of q, computed from algebra samples only (r_mu is
/// never read). Euler8Pi2 shifts the value by log(8 pi^2).
inline McEstimate entropy_mc(const So3Gaussian& d, long n_samples, const DensityTruncation& trunc,
                             Rng& rng, HaarConvention convention = HaarConvention::Normalized) {
  if (n_samples < 1) throw std::invalid_argument("entropy_mc: n_samples must be >= 1");
  trunc.validate();
  // Welford accumulation of -log qhat.
  double mean = 0.0, m2 = 0.0;
  for (long i = 0; i < n_samples; ++i) {
    AlgebraVector v;
    for (int j = 0; j < 3; ++j) v(j) = d.sigma(j) * rng.normal();
    const double x = -log_pushforward_density<double>(v, d.sigma, trunc.k_max);
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
  }
  McEstimate est;
  est.value = mean + cross_entropy_uniform(convention);
  est.stderr_ = n_samples > 1
                    ? std::sqrt(m2 / static_cast<double>(n_samples - 1) / static_cast<double>(n_samples))
                    : 0.0;
  return est;
}

/// KL(q || uniform) = H(q, uniform) - H(q), both terms in the same convention.
inline McEstimate kl_to_uniform(const So3Gaussian& d, long n_samples, const DensityTruncation& trunc,
                                Rng& rng, HaarConvention convention = HaarConvention::Normalized) {
  McEstimate h = entropy_mc(d, n_samples, trunc, rng, convention);
  return {cross_entropy_uniform(convention) - h.value, h.stderr_};
}

}  // namespace so3vae
