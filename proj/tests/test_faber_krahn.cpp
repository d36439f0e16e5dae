#include <gtest/gtest.h>

#include "katokit/faber_krahn.hpp"

using namespace katokit;

namespace {

Eigen::VectorXd v2(double a, double b) { return Eigen::Vector2d(a, b); }

}  // namespace

TEST(Dirichlet, DiskEigenvalue) {
  const double exact = unit_ball_dirichlet(2);
  EXPECT_NEAR(exact, 2.891592982, 1e-8);
  const auto e = dirichlet_eigenvalue(TestSet::ball(v2(0, 0), 1.0), 0.04);
  EXPECT_TRUE(e.converged);
  EXPECT_NEAR(e.coarse / exact, 1.0, 5e-3);
  EXPECT_NEAR(e.fine / exact, 1.0, 5e-3);
  EXPECT_NEAR(e.richardson / exact, 1.0, 5e-4);
  // Scaling lambda(rB) = lambda(B) / r^2.
  const auto half = dirichlet_eigenvalue(TestSet::ball(v2(0.1, -0.2), 0.5), 0.02);
  EXPECT_NEAR(half.richardson / (4 * exact), 1.0, 5e-4);
}

TEST(Dirichlet, BoxMatchesSeparableFormula) {
  // Exact: (pi^2/2)(1/a^2 + 1/b^2); five-point: sum (2/h^2) sin^2(pi h / 2L).
  const double a = 1.2, b = 0.6;
  const auto e = dirichlet_eigenvalue(TestSet::box(v2(0, 0), v2(a, b)), 0.05);
  const double exact = 0.5 * kPi * kPi * (1 / (a * a) + 1 / (b * b));
  EXPECT_NEAR(e.richardson / exact, 1.0, 1e-5);
  const double h = 0.05;
  const double discrete = 2 / (h * h) * (std::pow(std::sin(kPi * h / (2 * a)), 2) + std::pow(std::sin(kPi * h / (2 * b)), 2));
  EXPECT_NEAR(e.coarse, discrete, 1e-9);
}

TEST(Dirichlet, ThreeDimensionalBall) {
  Eigen::VectorXd c = Eigen::Vector3d::Zero();
  const auto e = dirichlet_eigenvalue(TestSet::ball(c, 1.0), 0.2);
  EXPECT_NEAR(e.richardson / (0.5 * kPi * kPi), 1.0, 5e-3);
}

TEST(FaberKrahn, ConstantsAndMargins) {
  const double j01 = 2.404825557695773;
  EXPECT_NEAR(euclidean_faber_krahn_constant(2), kPi * j01 * j01 / 2, 1e-12);
  EXPECT_NEAR(euclidean_faber_krahn_constant(3), 0.5 * kPi * kPi * std::pow(4 * kPi / 3, 2.0 / 3), 1e-12);
  const auto e2 = Manifold::euclidean(2);
  const auto fk = FaberKrahnControlPair::constant(1.0, euclidean_faber_krahn_constant(2));
  const std::vector<TestSet> sets{TestSet::ball(v2(0, 0), 1.0), TestSet::ball(v2(0.2, 0.1), 0.5),
                                  TestSet::box(v2(-0.5, -0.5), v2(0.5, 0.5)), TestSet::box(v2(-0.6, -0.15), v2(0.6, 0.15))};
  const auto rep = faber_krahn_verify(e2, fk, v2(0, 0), sets, 0.04);
  EXPECT_TRUE(rep.pass) << rep.margin_min;
  // Disk: equality case; the margin is within the discretization tolerance of 0.
  EXPECT_LE(std::abs(rep.rows[0].margin), 1e-3 * rep.rows[0].bound);
  EXPECT_GT(rep.rows[2].margin, 0.0);
  EXPECT_THROW(faber_krahn_verify(e2, fk, v2(0, 0), {TestSet::ball(v2(0.5, 0), 0.6)}, 0.05), DomainError);
}

TEST(FaberKrahn, SquareBeatsDisk) {
  const double s = std::sqrt(kPi) / 2;  // square of area pi
  const auto sq = dirichlet_eigenvalue(TestSet::box(v2(-s, -s), v2(s, s)), 0.05);
  const auto disk = dirichlet_eigenvalue(TestSet::ball(v2(0, 0), 1.0), 0.05);
  EXPECT_GT(sq.richardson, disk.richardson + 10 * (sq.tolerance + disk.tolerance));
  EXPECT_NEAR(sq.richardson, kPi * kPi / (4 * s * s), 1e-4);
}

TEST(HeatBound, EuclideanConstantAndPair) {
  const HeatKernelEngine e(Manifold::euclidean(3));
  const double a = euclidean_faber_krahn_constant(3);
  const auto fk = FaberKrahnControlPair::constant(1.0, a);
  const auto rep = heat_bound_sweep(e, fk, 1e-3, 1.0, 20, sample_points(e.model()));
  // t <= R^2: the ratio is (2 pi)^{-3/2} a^{3/2} for every t.
  EXPECT_NEAR(rep.C_hat / (std::pow(2 * kPi, -1.5) * std::pow(a, 1.5)), 1.0, 1e-12);
  EXPECT_TRUE(rep.pass);
  const auto pair = control_pair_from_faber_krahn(fk, rep, 3);
  const auto v = verify_control_pair(e, pair, log_spaced(1e-4, 1.0, 15), sample_points(e.model()));
  EXPECT_TRUE(v.pass) << v.margin_min;
  for (double q : {1.6, 2.0, 5.0}) EXPECT_TRUE(std::isfinite(pair.certificates.count(q) ? pair.certificates.at(q) : tilde_integral(pair, q)));
}

TEST(HeatBound, TorusLongTime) {
  const HeatKernelEngine e(Manifold::torus(2));
  const auto fk = FaberKrahnControlPair::constant(1.0, euclidean_faber_krahn_constant(2));
  const auto rep = heat_bound_sweep(e, fk, 1.0, 50.0, 12, {origin(e.model())});
  // p -> 1/vol, min(t, R^2) = 1: ratio -> a / (4 pi^2).
  EXPECT_TRUE(std::isfinite(rep.C_hat));
  const double late = e.on_diagonal(100.0) * fk.a;
  EXPECT_NEAR(late, fk.a / (4 * kPi * kPi), 1e-9);
  EXPECT_GE(rep.C_hat_doubled, late);
}

TEST(HeatBound, ChainInequality) {
  for (int m : {1, 2, 3})
    for (double t : log_spaced(1e-4, 10.0, 25))
      for (double R : {0.1, 0.5, 1.0, 2.0}) EXPECT_GE(min_chain_slack(t, R, 2.0, m), -1e-15) << m << " " << t << " " << R;
}
