#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "katokit/numerics.hpp"

using namespace katokit;

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  for (int n : {1, 2, 5, 8, 16, 40}) {
    const GaussRule& rule = gauss_legendre(n);
    double sum_w = 0.0;
    for (double w : rule.weights) sum_w += w;
    EXPECT_NEAR(sum_w, 2.0, 1e-14) << n;
    // degree 2n-1 monomial with even power
    const int deg = 2 * n - 2;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], deg);
    EXPECT_NEAR(s, 2.0 / (deg + 1), 1e-13) << n;
  }
}

TEST(GaussLegendre, NodesSortedAndSymmetric) {
  const GaussRule& rule = gauss_legendre(9);
  for (int i = 0; i + 1 < 9; ++i) EXPECT_LT(rule.nodes[i], rule.nodes[i + 1]);
  for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(rule.nodes[i], -rule.nodes[8 - i]);
}

TEST(Adaptive, SmoothAndSingularIntegrands) {
  auto r1 = integrate_adaptive([](double x) { return std::exp(-x * x); }, -5.0, 5.0);
  EXPECT_NEAR(r1.value, std::sqrt(M_PI) * std::erf(5.0), 1e-12);
  auto r2 = integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-12, 1e-12, 10000);
  EXPECT_NEAR(r2.value, 2.0, 1e-8);
  auto r3 = integrate_to_infinity([](double x) { return std::exp(-x); }, 1.0);
  EXPECT_NEAR(r3.value, std::exp(-1.0), 1e-12);
}

TEST(Panels, GradedTowardSingularEndpoint) {
  std::vector<PanelFeature> f{{0.0, 0.5, true, 1e-10}};
  auto edges = panel_edges(0.0, 3.0, f, 0.5);
  EXPECT_EQ(edges.front(), 0.0);
  EXPECT_EQ(edges.back(), 3.0);
  EXPECT_LE(edges[1], 1e-9);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) EXPECT_LT(edges[i], edges[i + 1]);
  // r^{-1/2} integrated on graded panels
  const double v = integrate_panels([](double r) { return 1.0 / std::sqrt(r); }, edges, 8);
  EXPECT_NEAR(v, 2.0 * std::sqrt(3.0), 1e-4);
}

TEST(Panels, InteriorFeatureIsAStop) {
  std::vector<PanelFeature> f{{1.3, 0.01, false, 0.0}, {2.0, 0.1, true, 1e-12}};
  auto edges = panel_edges(0.0, 4.0, f, 1.0);
  EXPECT_NE(std::find(edges.begin(), edges.end(), 1.3), edges.end());
  EXPECT_NE(std::find(edges.begin(), edges.end(), 2.0), edges.end());
  const double v = integrate_panels([](double r) { return std::pow(std::abs(r - 2.0), -0.5); }, edges, 8);
  EXPECT_NEAR(v, 2.0 * std::sqrt(2.0) + 2.0 * std::sqrt(2.0), 1e-4);
}

TEST(PairwiseSum, MatchesNaiveOnSmallIntegers) {
  std::vector<double> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = i;
  EXPECT_EQ(pairwise_sum(v), 999.0 * 1000.0 / 2.0);
}

TEST(PowerLaw, RecoversExponent) {
  std::vector<double> x{0.01, 0.02, 0.04, 0.08}, y;
  for (double t : x) y.push_back(3.0 * std::pow(t, 0.5));
  auto fit = fit_power_law(x, y);
  EXPECT_NEAR(fit.exponent, 0.5, 1e-12);
  EXPECT_NEAR(fit.coefficient, 3.0, 1e-11);
}
