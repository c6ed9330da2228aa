#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "so3vae/so3_gauss.hpp"

using namespace so3vae;

namespace {

using oracle::angle_density;

So3Gaussian iso(double s, Rotation r_mu = Rotation::Identity()) { return {r_mu, Eigen::Vector3d::Constant(s)}; }

}  // namespace

TEST(Validation, RejectsBadInputs) {
  EXPECT_THROW(iso(0.0).validate(), std::invalid_argument);
  EXPECT_THROW(iso(-1.0).validate(), std::invalid_argument);
  EXPECT_THROW(iso(std::nan("")).validate(), std::invalid_argument);
  So3Gaussian d = iso(0.3);
  d.r_mu(0, 0) = 2.0;
  EXPECT_THROW(d.validate(), std::invalid_argument);
  EXPECT_THROW(DensityTruncation{0}.validate(), std::invalid_argument);
  EXPECT_NO_THROW(DensityTruncation{1}.validate());
}

TEST(Constants, LogHaarVolume) {
  EXPECT_NEAR(kLogHaarVolume, 4.368901313378636, 1e-12);
  EXPECT_EQ(cross_entropy_uniform(HaarConvention::Normalized), 0.0);
  EXPECT_EQ(cross_entropy_uniform(HaarConvention::Euler8Pi2), kLogHaarVolume);
  EXPECT_EQ(parse_haar_convention("euler8pi2"), HaarConvention::Euler8Pi2);
  EXPECT_THROW(parse_haar_convention("haar"), std::invalid_argument);
}

TEST(Sample, ConcentratesAsSigmaVanishes) {
  Rng rng(1);
  const Rotation mu = sample_uniform(rng);
  const auto [r, v] = sample(iso(1e-8, mu), rng);
  EXPECT_LT(log_map(mu.transpose() * r).norm(), 1e-6);
  EXPECT_LT(v.norm(), 1e-6);
}

TEST(Sample, ReturnsMatchingAlgebraVector) {
  Rng rng(2);
  const So3Gaussian d{sample_uniform(rng), Eigen::Vector3d(0.2, 0.5, 1.5)};
  for (int i = 0; i < 100; ++i) {
    const auto [r, v] = sample(d, rng);
    EXPECT_LT((r - d.r_mu * exp_map<double>(v)).norm(), 1e-15);
  }
}

TEST(Sample, AngleHistogramMatchesOracle) {
  Rng rng(3);
  const double sigma = 0.3;
  const int n = 1'000'000, bins = 200;
  std::vector<double> hist(bins, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto [r, v] = sample(iso(sigma), rng);
    hist[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(theta_of(r) / kPi * bins)))] += 1.0;
  }
  double cdf = 0.0, ref = 0.0, err = 0.0;
  for (int b = 0; b < bins; ++b) {
    cdf += hist[static_cast<std::size_t>(b)] / n;
    ref += oracle::angle_mass(kPi * b / bins, kPi * (b + 1) / bins, sigma);
    err = std::max(err, std::abs(cdf - ref));
  }
  EXPECT_LT(err, 0.01);
}

TEST(Sample, LeftInvariance) {
  // The law of r_mu^T R_z must not depend on r_mu: compare angle CDFs of two
  // location choices with a two-sample Kolmogorov-Smirnov bound.
  Rng pick(4);
  const Rotation a = sample_uniform(pick), b = sample_uniform(pick);
  const int n = 20000;
  std::vector<double> ta, tb;
  Rng ra(5), rb(6);
  for (int i = 0; i < n; ++i) {
    ta.push_back(theta_of(a.transpose() * sample(iso(0.7, a), ra).first));
    tb.push_back(theta_of(b.transpose() * sample(iso(0.7, b), rb).first));
  }
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ta.size() && j < tb.size()) {
    if (ta[i] <= tb[j]) ++i; else ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / n));
  }
  // p = 0.01 critical value: 1.628 * sqrt(2/n)
  EXPECT_LT(d, 1.628 * std::sqrt(2.0 / n));
}

TEST(LogDensity, SingularAtLocation) {
  Rng rng(7);
  const Rotation mu = sample_uniform(rng);
  EXPECT_FALSE(log_density(iso(0.3, mu), mu).has_value());
  EXPECT_TRUE(log_density(iso(0.3, mu), mu * exp_map<double>(Eigen::Vector3d(1e-6, 0, 0))).has_value());
}

TEST(LogDensity, IsotropyDependsOnlyOnAngle) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double t = rng.uniform(0.01, kPi - 0.01);
    Eigen::Vector3d u1(rng.normal(), rng.normal(), rng.normal()), u2(rng.normal(), rng.normal(), rng.normal());
    const double a = *log_density(iso(0.4), exp_map<double>(t * u1.normalized()));
    const double b = *log_density(iso(0.4), exp_map<double>(t * u2.normalized()));
    EXPECT_NEAR(a, b, 1e-12);
  }
}

TEST(LogDensity, MatchesAngleOracle) {
  for (double sigma : {0.1, 0.5, 1.0, 3.0}) {
    for (double t : {0.05, 0.5, 1.5, 2.5, 3.1}) {
      const double got = *log_density(iso(sigma), exp_map<double>(Eigen::Vector3d(0, t, 0)), {12});
      const double want = oracle::log_qhat(t, sigma);
      if (std::isfinite(want)) EXPECT_NEAR(got, want, 1e-9) << sigma << " " << t;
    }
  }
}

TEST(LogDensity, LeftInvariance) {
  Rng rng(9);
  const So3Gaussian d{Rotation::Identity(), Eigen::Vector3d(0.2, 0.6, 1.1)};
  for (int i = 0; i < 200; ++i) {
    const Rotation a = sample_uniform(rng), b = sample_uniform(rng);
    const So3Gaussian da{a, d.sigma};
    EXPECT_NEAR(*log_density(da, a * b), *log_density(d, b), 1e-9);
  }
}

TEST(LogDensity, TruncationInsensitive) {
  Rng rng(10);
  for (double sigma : {0.1, 0.5, 1.0}) {
    for (int i = 0; i < 100; ++i) {
      const double t = rng.uniform(0.1, kPi);
      const Rotation r = exp_map<double>(t * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized());
      EXPECT_LT(std::abs(*log_density(iso(sigma), r, {3}) - *log_density(iso(sigma), r, {10})), 1e-12);
    }
  }
}

TEST(LogDensity, FiniteOverWideSigmaRange) {
  Rng rng(11);
  for (double sigma : {1e-4, 1e-2, 1.0, 1e2, 1e3}) {
    const Rotation r = exp_map<double>(Eigen::Vector3d(0.0, 0.0, std::min(1.0, 5.0 * sigma)));
    EXPECT_TRUE(std::isfinite(*log_density(iso(sigma), r))) << sigma;
    const Eigen::Vector3d v = sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    EXPECT_TRUE(std::isfinite(log_pushforward_density<double>(v, Eigen::Vector3d::Constant(sigma), 5))) << sigma;
  }
}

TEST(LogDensity, NormalizesUnderHaar) {
  for (double sigma : {0.5}) {
    Rng rng(12);
    const int n = 1'000'000;
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto lq = log_density(iso(sigma), sample_uniform(rng));
      const double x = lq ? std::exp(*lq) : 0.0;
      const double delta = x - mean;
      mean += delta / (i + 1);
      m2 += delta * (x - mean);
    }
    const double se = std::sqrt(m2 / (n - 1) / n);
    EXPECT_LT(std::abs(mean - 1.0), 3.0 * se) << mean << " +- " << se;
  }
}

TEST(Entropy, MatchesQuadrature) {
  const double sigma = 0.3;
  Rng rng(13);
  const McEstimate h = entropy_mc(iso(sigma), 1'000'000, {}, rng);
  EXPECT_NEAR(h.value, oracle::entropy(sigma), 0.02);
}

TEST(Entropy, IndependentOfLocationBitExact) {
  Rng pick(14);
  const So3Gaussian a{sample_uniform(pick), Eigen::Vector3d(0.1, 0.3, 0.9)};
  const So3Gaussian b{sample_uniform(pick), a.sigma};
  Rng ra(15), rb(15);
  const McEstimate ha = entropy_mc(a, 5000, {}, ra), hb = entropy_mc(b, 5000, {}, rb);
  EXPECT_EQ(ha.value, hb.value);
  EXPECT_EQ(ha.stderr_, hb.stderr_);
}

TEST(Entropy, SingleSampleAllowed) {
  Rng rng(16);
  const McEstimate h = entropy_mc(iso(0.3), 1, {}, rng);
  EXPECT_TRUE(std::isfinite(h.value));
  EXPECT_EQ(h.stderr_, 0.0);
  EXPECT_THROW(entropy_mc(iso(0.3), 0, {}, rng), std::invalid_argument);
}

TEST(Entropy, LargeSigmaLimit) {
  // As sigma grows, |v| mod 2 pi becomes uniform, so the angle law tends to
  // 1/pi on [0, pi] rather than the Haar law (1 - cos t)/pi. The limiting KL
  // is -(1/pi) int_0^pi log(1 - cos t) dt = log 2, not 0.
  EXPECT_NEAR(oracle::entropy(100.0), -std::log(2.0), 1e-6);
  // |v| ~ 160 at sigma = 100, so the window must reach |k| ~ 100 to cover
  // every preimage that carries mass.
  Rng rng(17);
  const McEstimate h = entropy_mc(iso(100.0), 20000, {200}, rng);
  EXPECT_NEAR(h.value, oracle::entropy(100.0), 0.05);
  Rng rng2(17);
  const McEstimate kl = kl_to_uniform(iso(100.0), 20000, {200}, rng2, HaarConvention::Euler8Pi2);
  EXPECT_NEAR(kl.value, std::log(2.0), 0.05);
}

TEST(Entropy, SmallAndLargeSampleSizesAgree) {
  Rng a(18), b(19);
  const McEstimate small = entropy_mc(iso(0.5), 10'000, {}, a);
  const McEstimate large = entropy_mc(iso(0.5), 1'000'000, {}, b);
  EXPECT_LT(std::abs(small.value - large.value),
            3.0 * std::hypot(small.stderr_, large.stderr_));
}

TEST(KlToUniform, NonNegativeAndConventionFree) {
  for (double sigma : {0.1, 0.3, 1.0}) {
    Rng a(20), b(20);
    const McEstimate kn = kl_to_uniform(iso(sigma), 20000, {}, a, HaarConvention::Normalized);
    const McEstimate ke = kl_to_uniform(iso(sigma), 20000, {}, b, HaarConvention::Euler8Pi2);
    EXPECT_GE(kn.value, -3.0 * kn.stderr_);
    EXPECT_NEAR(kn.value, ke.value, 1e-12);
  }
}
