#include <gtest/gtest.h>

#include "katokit/semigroup.hpp"

using namespace katokit;

namespace {

// -(1/2) u'' + cos(theta) u in the Fourier basis e^{ik theta}, |k| <= K: diagonal k^2/2, +-1
// off-diagonals 1/2.
Eigen::MatrixXd hill_matrix(int K) {
  const int N = 2 * K + 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    const double k = i - K;
    A(i, i) = 0.5 * k * k;
    if (i + 1 < N) A(i, i + 1) = A(i + 1, i) = 0.5;
  }
  return A;
}

// (e^{-tH} 1)(0) by the Fourier route: the coefficient vector of 1 is e_0, the value at 0 is
// the sum of coefficients.
double hill_semigroup_at_zero(double t, int K = 40) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hill_matrix(K));
  const Eigen::VectorXd e0 = Eigen::VectorXd::Unit(2 * K + 1, K);
  const Eigen::VectorXd c = es.eigenvectors() * ((-t * es.eigenvalues().array()).exp().matrix().asDiagonal() *
                                                 (es.eigenvectors().transpose() * e0));
  return c.sum();
}

const Potential kCos = Potential::cosine(1.0, 1);

}  // namespace

TEST(Discretize, LaplacianDispersion) {
  const int n = 64;
  const DiscretizedOperator op(Manifold::circle(), n, Potential::constant(0));
  const double h = 2 * kPi / n;
  std::vector<double> expected;
  for (int k = 0; k < n; ++k) expected.push_back(2.0 / (h * h) * std::pow(std::sin(kPi * k / n), 2));
  std::sort(expected.begin(), expected.end());
  for (int k = 0; k < n; ++k) EXPECT_NEAR(op.eigenvalues()[k], expected[k], 1e-10 * (1 + expected[k]));
  const Eigen::MatrixXd H = op.matrix();
  EXPECT_EQ((H - H.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(H.rowwise().sum().cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(DiscretizedOperator(Manifold::circle(), 4, Potential::constant(0)), DomainError);
  EXPECT_THROW(DiscretizedOperator(Manifold::sphere2(), 16, Potential::constant(0)), UnsupportedModel);
}

TEST(Discretize, BandedMatchesDense) {
  const DiscretizedOperator op(Manifold::circle(), 101, kCos);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix());
  EXPECT_LT((es.eigenvalues() - op.eigenvalues()).cwiseAbs().maxCoeff(), 1e-9);
  // Eigenvectors are orthonormal after the permutation back to node order.
  const Eigen::MatrixXd V = op.eigenvectors();
  EXPECT_LT((V.transpose() * V - Eigen::MatrixXd::Identity(101, 101)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((op.matrix() * V - V * op.eigenvalues().asDiagonal()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Discretize, ConstantShift) {
  const DiscretizedOperator a(Manifold::circle(), 128, kCos);
  const DiscretizedOperator b(Manifold::circle(), 128, Potential::sum({kCos, Potential::constant(2.5)}));
  EXPECT_LT((b.eigenvalues() - a.eigenvalues() - Eigen::VectorXd::Constant(128, 2.5)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(a.eigenvalues()[0], -1.0);
}

TEST(Discretize, MathieuGroundState) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hill_matrix(30));
  const double hill = es.eigenvalues()[0];
  EXPECT_NEAR(hill, -0.535064852287834, 1e-12);  // frozen Fourier value
  const double l1 = DiscretizedOperator(Manifold::circle(), 1024, kCos).eigenvalues()[0];
  const double l2 = DiscretizedOperator(Manifold::circle(), 2048, kCos).eigenvalues()[0];
  EXPECT_LT(std::abs(l1 - l2), 1e-6);
  EXPECT_NEAR(l2, hill, 1e-6);
  // Richardson from the two resolutions lands much closer.
  EXPECT_NEAR((4 * l2 - l1) / 3, hill, 1e-10);
}

TEST(Discretize, TorusDispersionAndCapping) {
  const int n = 12;
  const auto t2 = Manifold::torus(2, 1.0);
  const DiscretizedOperator op(t2, n, Potential::constant(0));
  const double h = 1.0 / n;
  std::vector<double> expected;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      expected.push_back(2.0 / (h * h) * (std::pow(std::sin(kPi * k / n), 2) + std::pow(std::sin(kPi * l / n), 2)));
  std::sort(expected.begin(), expected.end());
  for (int k = 0; k < n * n; ++k) EXPECT_NEAR(op.eigenvalues()[k], expected[k], 1e-9 * (1 + expected[k]));
  const DiscretizedOperator spike(t2, n, Potential::radial_power(Eigen::Vector2d(0, 0), 0.5));
  EXPECT_EQ(spike.capped_nodes(), 1);
  EXPECT_DOUBLE_EQ(spike.potential_values()[0], std::pow(0.5 * h, -0.5));
}

TEST(Semigroup, IdentityAndHeatKernel) {
  const int n = 512;
  const DiscretizedOperator op(Manifold::circle(), n, Potential::constant(0));
  const Eigen::VectorXd f = op.sample([](PointRef y) { return std::sin(3 * y[0]) + 0.2; });
  EXPECT_EQ(op.apply(0.0, f), f);
  EXPECT_THROW(op.apply(-1.0, f), DomainError);
  // Column j divided by the cell width approximates p(t, x_i, x_j).
  const HeatKernelEngine engine(Manifold::circle());
  const double t = 0.3;
  const Eigen::MatrixXd P = op.propagator(t);
  double worst = 0.0;
  for (int i = 0; i < n; i += 17) {
    const double exact = engine.eval(t, op.nodes().col(i), op.nodes().col(5));
    worst = std::max(worst, std::abs(P(i, 5) / op.cell_weight() - exact));
  }
  EXPECT_LT(worst, 2e-4);
  // Constant potential commutes: e^{-tH} = e^{-ct} e^{t Delta/2}.
  const DiscretizedOperator shifted(Manifold::circle(), n, Potential::constant(0.7));
  EXPECT_LT((shifted.apply(t, f) - std::exp(-0.7 * t) * op.apply(t, f)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Semigroup, GroupLawSelfAdjointPositive) {
  for (const auto& op : {DiscretizedOperator(Manifold::circle(), 200, kCos),
                         DiscretizedOperator(Manifold::torus(2, 2 * kPi), 16, Potential::cosine(2.0, 1))}) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    Eigen::VectorXd f(op.size()), g(op.size());
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      f[k] = nd(rng);
      g[k] = nd(rng);
    }
    EXPECT_LT((op.apply(0.3, op.apply(0.4, f)) - op.apply(0.7, f)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(op.inner(op.apply(0.5, f), g), op.inner(f, op.apply(0.5, g)), 1e-12);
    const Eigen::VectorXd pos = op.apply(0.5, f.cwiseAbs());
    EXPECT_GE(pos.minCoeff(), -1e-12);
  }
}

TEST(QNorm, ExactCases) {
  const auto s1 = Manifold::circle();
  const DiscretizedOperator heat(s1, 128, Potential::constant(0));
  for (double t : {0.0, 0.5, 2.0}) {
    EXPECT_NEAR(q_norm(heat, t, kInf).value, 1.0, 1e-12);
    EXPECT_NEAR(q_norm(heat, t, 2.0).value, 1.0, 1e-12);
  }
  const DiscretizedOperator neg(s1, 128, Potential::constant(-1.0));
  EXPECT_NEAR(q_norm(neg, 1.5, kInf).value, std::exp(1.5), 1e-10);
  EXPECT_NEAR(q_norm(neg, 1.5, 1.0).value, std::exp(1.5), 1e-10);
  EXPECT_THROW(q_norm(neg, 1.0, 0.5), DomainError);
}

TEST(QNorm, PowerIterationAgreesWithSpectral) {
  // Dual route at q = 2: Boyd's iteration against the top eigenvalue of e^{-tH}.
  const DiscretizedOperator op(Manifold::circle(), 128, Potential::scale(-2.0, Potential::gaussian_bump(Point::Constant(1, 1.0), 0.3)));
  const double spectral = q_norm(op, 0.8, 2.0).value;
  const auto boyd = detail::boyd_norm(op, 0.8, 2.0);
  EXPECT_FALSE(boyd.exact);
  EXPECT_NEAR(boyd.value / spectral, 1.0, 1e-10);
  // q = 4 sits below the endpoint norms and above the q = 2 norm (the matrix is symmetric, so
  // log N_q is convex in 1/q and symmetric about 1/2).
  const double n4 = q_norm(op, 0.8, 4.0).value;
  EXPECT_LE(n4, q_norm(op, 0.8, kInf).value * (1 + 1e-12));
  EXPECT_GE(n4, spectral * (1 - 1e-12));
}

TEST(Bop, ConstantPotentialIsExact) {
  std::vector<double> ts;
  for (int i = 0; i <= 20; ++i) ts.push_back(0.1 * i);
  const auto rep = bop_bound_check(Manifold::circle(), 64, Potential::constant(1.0), ts, {1.5, 2.0, 4.0}, {1.0, 2.0, 4.0, kInf});
  EXPECT_TRUE(rep.pass);
  for (const auto& c : rep.constants) EXPECT_NEAR(c.C, 1.0, 1e-12);
  for (const auto& r : rep.rows) EXPECT_NEAR(r.margin, std::log(r.delta), 1e-10) << r.q << " " << r.t;
  const auto zero = bop_bound_check(Manifold::circle(), 64, Potential::constant(0.0), ts, {2.0}, {1.0, kInf});
  EXPECT_NEAR(zero.constants[0].C, 0.0, 1e-12);
  EXPECT_THROW(bop_bound_check(Manifold::circle(), 64, Potential::constant(-1.0), ts, {2.0}, {1.0}), DomainError);
}

TEST(Bop, SpikeAndDomination) {
  std::vector<double> ts;
  for (int i = 0; i <= 10; ++i) ts.push_back(0.2 * i);
  const auto spike = Potential::scale(0.5, Potential::radial_power(Point::Constant(1, 0.0), 0.5, 1.0));
  const auto rep = bop_bound_check(Manifold::circle(), 128, spike, ts, {1.5, 2.0, 4.0}, {1.0, 2.0, 4.0, kInf}, Potential::cosine(1.0, 2));
  EXPECT_TRUE(rep.pass) << to_json(rep).dump();
  for (std::size_t i = 1; i < rep.constants.size(); ++i) EXPECT_LE(rep.constants[i].C, rep.constants[i - 1].C);
  EXPECT_TRUE(std::isfinite(rep.constants[0].C));
  EXPECT_GT(rep.constants[0].C, 0.0);
  // With w_+ = 0 domination is an identity.
  const DiscretizedOperator op(Manifold::circle(), 64, Potential::scale(-1.0, spike));
  EXPECT_LE(domination_violation(op, op, 0.5, 3, 1), 1e-12);
}

TEST(RieszThorin, Margins) {
  const DiscretizedOperator heat(Manifold::circle(), 96, Potential::constant(0));
  const auto r0 = riesz_thorin_check(heat, 0.5, {0.5});
  EXPECT_NEAR(r0.rows[0].norm, 1.0, 1e-12);
  EXPECT_NEAR(r0.rows[0].q, 2.0, 1e-15);
  const DiscretizedOperator c(Manifold::circle(), 96, Potential::constant(-0.6));
  for (const auto& row : riesz_thorin_check(c, 1.0, {0.25, 0.5, 0.75}).rows) EXPECT_NEAR(row.margin, 0.0, 1e-10);
  const DiscretizedOperator var(Manifold::circle(), 96, Potential::scale(-1.0, Potential::sum({Potential::constant(1.0), kCos})));
  const auto rep = riesz_thorin_check(var, 1.0, {0.25, 0.5, 0.75});
  EXPECT_TRUE(rep.pass);
  EXPECT_GE(rep.margin_min, -1e-10);
  EXPECT_THROW(riesz_thorin_check(var, 1.0, {1.0}), DomainError);
}

TEST(Spectral, FourierOracleAndMonteCarlo) {
  // Grid semigroup of 1 at theta = 0 against the Fourier route.
  const DiscretizedOperator op(Manifold::circle(), 1024, kCos);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(op.size());
  for (double t : {0.25, 0.5, 1.0}) EXPECT_NEAR(op.apply(t, one)[0], hill_semigroup_at_zero(t), 2e-6) << t;
  const auto rows = feynman_kac_vs_spectral(Manifold::circle(), 128, kCos, [](PointRef) { return 1.0; }, 0, {0.5}, 20000, 1e-2, 3);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LT(std::abs(rows[0].z), 4.0);
  EXPECT_LT(std::abs(rows[0].spectral - rows[0].spectral_refined), 1e-4);
}
