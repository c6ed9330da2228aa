#include <gtest/gtest.h>

#include <cmath>

#include "so3vae/wigner.hpp"

using namespace so3vae;

namespace {

// (x, y, z) -> (y, z, x): order of the real degree-1 harmonics.
Eigen::Matrix3d axis_permutation() {
  Eigen::Matrix3d p;
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  return p;
}

Eigen::Vector3d random_point(Rng& rng) {
  return Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
}

// Independent oracle: fit D from harmonic values at many sphere points,
// D = argmin sum |Y(R p_i) - D Y(p_i)|^2.
Eigen::MatrixXd fitted_block(int l, const Rotation& r, Rng& rng) {
  const int n = 2 * l + 1, pts = 4 * n + 20;
  Eigen::MatrixXd a(n, pts), b(n, pts);
  for (int i = 0; i < pts; ++i) {
    const Eigen::Vector3d p = random_point(rng);
    const auto y0 = real_spherical_harmonics<double>(l, p);
    const auto y1 = real_spherical_harmonics<double>(l, Eigen::Vector3d(r * p));
    for (int m = 0; m < n; ++m) {
      a(m, i) = y0[static_cast<std::size_t>(l * l + m)];
      b(m, i) = y1[static_cast<std::size_t>(l * l + m)];
    }
  }
  return (a * a.transpose()).ldlt().solve(a * b.transpose()).transpose();
}

}  // namespace

TEST(RepSpec, DimsAndValidation) {
  EXPECT_EQ(RepSpec::up_to(3, 3).total_dim(), 48);
  EXPECT_EQ(RepSpec::up_to(0, 1).total_dim(), 1);
  EXPECT_THROW((RepSpec{{{1, 1}, {1, 1}}}.validate()), std::invalid_argument);
  EXPECT_THROW((RepSpec{{{2, 1}, {1, 1}}}.validate()), std::invalid_argument);
  EXPECT_THROW((RepSpec{{{7, 1}}}.validate()), std::invalid_argument);
  EXPECT_THROW((RepSpec{{{1, 0}}}.validate()), std::invalid_argument);
  EXPECT_THROW(RepSpec{}.validate(), std::invalid_argument);
}

TEST(Harmonics, OrthonormalOnSphere) {
  // MC check of <Y_a, Y_b> = delta_ab / (4 pi) * 4 pi under the uniform measure.
  Rng rng(1);
  const int L = 3, n = (L + 1) * (L + 1), samples = 200000;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < samples; ++i) {
    const auto y = real_spherical_harmonics<double>(L, random_point(rng));
    const Eigen::Map<const Eigen::VectorXd> v(y.data(), n);
    g += v * v.transpose();
  }
  g *= 4.0 * kPi / samples;
  EXPECT_LT((g - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(WignerD, DegreeZeroAndIdentity) {
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const Eigen::MatrixXd d0 = wigner_d(0, sample_uniform(rng));
    ASSERT_EQ(d0.rows(), 1);
    EXPECT_NEAR(d0(0, 0), 1.0, 1e-15);
  }
  for (int l = 0; l <= kMaxWignerDegree; ++l) {
    const int n = 2 * l + 1;
    EXPECT_LT((wigner_d(l, Rotation::Identity()) - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-12) << l;
  }
  EXPECT_THROW(wigner_d(7, Rotation::Identity()), std::invalid_argument);
  EXPECT_THROW(wigner_d(-1, Rotation::Identity()), std::invalid_argument);
}

TEST(WignerD, DegreeOneIsPermutedRotation) {
  Rng rng(3);
  const Eigen::Matrix3d p = axis_permutation();
  for (int i = 0; i < 1000; ++i) {
    const Rotation r = sample_uniform(rng);
    EXPECT_LT((wigner_d(1, r) - p * r * p.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(WignerD, MatchesHarmonicFit) {
  Rng rng(4);
  for (int l = 0; l <= kMaxWignerDegree; ++l) {
    for (int i = 0; i < 5; ++i) {
      const Rotation r = sample_uniform(rng);
      EXPECT_LT((wigner_d(l, r) - fitted_block(l, r, rng)).norm(), 1e-9) << l;
    }
  }
}

TEST(WignerD, HomomorphismOrthogonalityCharacter) {
  Rng rng(5);
  for (int l = 0; l <= 3; ++l) {
    const int n = 2 * l + 1;
    for (int i = 0; i < 1000; ++i) {
      const Rotation g = sample_uniform(rng), h = sample_uniform(rng);
      const Eigen::MatrixXd dg = wigner_d(l, g);
      EXPECT_LT((dg * wigner_d(l, h) - wigner_d(l, g * h)).norm(), 1e-8);
      EXPECT_LT((dg.transpose() * dg - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-9);
      const double th = theta_of(g);
      double chi = 0.0;
      for (int m = -l; m <= l; ++m) chi += std::cos(m * th);
      EXPECT_NEAR(dg.trace(), chi, 1e-8);
    }
  }
}

TEST(WignerD, GimbalAngles) {
  // beta = 0 and beta = pi are where the Euler decomposition degenerates.
  Rng rng(6);
  for (int l = 1; l <= 4; ++l) {
    for (const Rotation& r : {Rotation(rot_z<double>(0.9)), Rotation(rot_z<double>(0.4) * rot_y<double>(kPi)),
                              Rotation(rot_y<double>(kPi) * rot_z<double>(-1.3))}) {
      EXPECT_LT((wigner_d(l, r) - fitted_block(l, r, rng)).norm(), 1e-9) << l;
    }
  }
}

TEST(RepMatrix, StackProperties) {
  const RepSpec spec = RepSpec::up_to(3, 3);
  const int n = spec.total_dim();
  EXPECT_LT((rep_matrix(spec, Rotation::Identity()) - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-12);
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Rotation g = sample_uniform(rng), h = sample_uniform(rng);
    const Eigen::MatrixXd w = rep_matrix(spec, g);
    EXPECT_LT((w * rep_matrix(spec, h) - rep_matrix(spec, g * h)).norm(), 1e-8);
    EXPECT_LT((w.transpose() * w - Eigen::MatrixXd::Identity(n, n)).norm(), 1e-9);
  }
  const double a = 0.7, b = 1.9;
  EXPECT_LT((rep_matrix(spec, rot_z<double>(a)) * rep_matrix(spec, rot_z<double>(b)) -
             rep_matrix(spec, rot_z<double>(a + b)))
                .norm(),
            1e-10);
}

TEST(RepMatrix, Faithful) {
  // Distinct rotations never share a representation matrix.
  const RepSpec spec = RepSpec::up_to(1, 1);
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const Rotation a = sample_uniform(rng), b = sample_uniform(rng);
    if (frobenius_distance(a, b) > 1e-6) EXPECT_GT((rep_matrix(spec, a) - rep_matrix(spec, b)).norm(), 1e-7);
  }
}

TEST(Act, Properties) {
  const RepSpec spec = RepSpec::up_to(3, 3);
  Rng rng(9);
  const Eigen::VectorXd f = make_content(spec, 5);
  EXPECT_LT((act(spec, Rotation::Identity(), f) - f).norm(), 1e-12);
  EXPECT_THROW(act(spec, Rotation::Identity(), Eigen::VectorXd::Zero(47)), std::invalid_argument);
  for (int i = 0; i < 100; ++i) {
    const Rotation r1 = sample_uniform(rng), r2 = sample_uniform(rng);
    EXPECT_NEAR(act(spec, r1, f).norm(), f.norm(), 1e-10);
    EXPECT_LT((act(spec, r2, act(spec, r1, f)) - act(spec, r2 * r1, f)).norm(), 1e-8);
    EXPECT_LT((act(spec, r1, f) - rep_matrix(spec, r1) * f).norm(), 1e-12);
  }
}

TEST(HarmonicRepresentation, AgreesWithFactorialRoute) {
  const RepSpec spec = RepSpec::up_to(3, 2);
  const HarmonicRepresentation h(3);
  Rng rng(10);
  const Eigen::VectorXd f = make_content(spec, 11);
  for (int i = 0; i < 200; ++i) {
    const Rotation r = sample_uniform(rng);
    const auto blocks = h.blocks<double>(r);
    for (int l = 0; l <= 3; ++l) EXPECT_LT((blocks[static_cast<std::size_t>(l)] - wigner_d(l, r)).norm(), 1e-11);
    EXPECT_LT((h.act<double>(spec, r, f) - act(spec, r, f)).norm(), 1e-10);
  }
}

TEST(Dataset, Properties) {
  const RepSpec spec = RepSpec::up_to(3, 3);
  Rng a(12), b(12);
  const auto d1 = make_toy_dataset(spec, 3, 200, a);
  const auto d2 = make_toy_dataset(spec, 3, 200, b);
  const double norm = make_content(spec, 3).norm();
  ASSERT_EQ(d1.size(), 200u);
  for (std::size_t i = 0; i < d1.size(); ++i) {
    EXPECT_EQ(d1[i].x.size(), 48);
    EXPECT_NEAR(d1[i].x.norm(), norm, 1e-10);
    EXPECT_TRUE(is_rotation(d1[i].r_true));
    EXPECT_EQ(d1[i].x, d2[i].x);
    EXPECT_EQ(d1[i].r_true, d2[i].r_true);
  }
  EXPECT_THROW(make_toy_dataset(spec, 3, 0, a), std::invalid_argument);
}

TEST(Trajectory, ClosedConstantSpeedLoop) {
  const RepSpec spec = RepSpec::up_to(3, 3);
  const Eigen::VectorXd v = make_content(spec, 4);
  Rng rng(13);
  const Eigen::Vector3d axis = random_point(rng);
  const auto traj = make_s1_trajectory(spec, v, axis, 100);
  ASSERT_EQ(traj.size(), 101u);
  EXPECT_LT((traj.back().x - traj.front().x).norm(), 1e-9);
  const double step = (traj[1].x - traj[0].x).norm();
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) EXPECT_NEAR((traj[i + 1].x - traj[i].x).norm(), step, 1e-9);
  EXPECT_THROW(make_s1_trajectory(spec, v, Eigen::Vector3d(1, 1, 0), 100), std::invalid_argument);
}

TEST(Trajectory, QuarterTurnsAboutZ) {
  // degree 0 and 1, one copy each; f = (c, y, z, x) in harmonic order.
  const RepSpec spec = RepSpec::up_to(1, 1);
  Eigen::VectorXd f(4);
  f << 2.0, 0.0, 0.0, 1.0;  // the x-harmonic
  const auto traj = make_s1_trajectory(spec, f, Eigen::Vector3d::UnitZ(), 4);
  ASSERT_EQ(traj.size(), 5u);
  // The x-direction harmonic rotates x -> y -> -x -> -y -> x.
  const double expect[5][4] = {{2, 0, 0, 1}, {2, 1, 0, 0}, {2, 0, 0, -1}, {2, -1, 0, 0}, {2, 0, 0, 1}};
  for (int i = 0; i < 5; ++i) {
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(traj[static_cast<std::size_t>(i)].x(k), expect[i][k], 1e-12) << i << k;
  }
}
