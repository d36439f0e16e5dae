#include <gtest/gtest.h>

#include <sstream>

#include "katokit/stochastics.hpp"

using namespace katokit;

namespace {

SimulationConfig config(const Manifold& m, double t, double h, long paths, std::uint64_t seed = 11) {
  SimulationConfig c;
  c.model = m;
  c.start = origin(m);
  c.t = t;
  c.h = h;
  c.paths = paths;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Simulate, DeterministicAcrossThreads) {
  auto c = config(Manifold::sphere2(), 0.3, 0.01, 3000);
  const auto a = simulate(c, {0.1, 0.3});
  c.threads = 3;
  const auto b = simulate(c, {0.1, 0.3});
  ASSERT_EQ(a.snapshots.size(), 2u);
  EXPECT_EQ((a.snapshots[1] - b.snapshots[1]).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.record_times[0], b.record_times[0]);
  c.seed = 12;
  const auto d = simulate(c, {0.3});
  EXPECT_GT((a.snapshots[1] - d.snapshots[0]).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(summary(a)["paths"], 3000);
}

TEST(Simulate, Validation) {
  EXPECT_THROW(simulate(config(Manifold::euclidean(2), 1.0, 2.0, 10)), DomainError);
  EXPECT_THROW(simulate(config(Manifold::euclidean(2), 1.0, 0.1, 0)), DomainError);
  auto c = config(Manifold::sphere2(), 1.0, 0.1, 10);
  c.scheme = Scheme::ChartEuler;
  EXPECT_THROW(simulate(c), UnsupportedModel);
  c.scheme = Scheme::GeodesicWalk;
  EXPECT_EQ(simulation_warnings(c).size(), 1u);
  c.h = 0.01;
  EXPECT_TRUE(simulation_warnings(c).empty());
  EXPECT_THROW(simulate(c, {2.0}), DomainError);
  EXPECT_EQ(parse_scheme("chart-euler"), Scheme::ChartEuler);
  EXPECT_THROW(parse_scheme("leapfrog"), DomainError);
}

TEST(Simulate, DumpPaths) {
  std::ostringstream os;
  dump_paths(config(Manifold::euclidean(2), 0.05, 0.01, 10), os, 2);
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 12);
  EXPECT_EQ(s.substr(0, 8), "0,0,0,0\n");
}

TEST(Fdd, EuclideanGaussianMoment) {
  // E exp(-|X_t|^2) = (1 + 2t)^{-m/2} for covariance t I.
  const auto e3 = Manifold::euclidean(3);
  const auto ens = simulate(config(e3, 0.5, 0.5, 20000));
  const TestFunction f = [](PointRef y) { return std::exp(-y.squaredNorm()); };
  const auto r = fdd_check(ens, {0}, {f}, std::pow(2.0, -1.5));
  EXPECT_LT(std::abs(r.z), 4.0);
  EXPECT_LT(r.std_error, 0.01);
}

TEST(Fdd, CircleTwoTimeCorrelation) {
  // E[cos X_{t1} cos X_{t2}] = e^{-(t2-t1)/2} (1 + e^{-2 t1}) / 2 from X_0 = 0.
  const auto s1 = Manifold::circle();
  const HeatKernelEngine engine(s1);
  auto c = config(s1, 0.8, 0.01, 20000);
  const auto ens = simulate(c, {0.3, 0.8});
  const TestFunction f = [](PointRef y) { return std::cos(y[0]); };
  const double exact = std::exp(-0.25) * 0.5 * (1 + std::exp(-0.6));
  const auto grid = build_grid(s1, 0.02);
  EXPECT_NEAR(fdd_quadrature(engine, c.start, {0.3, 0.8}, {f, f}, grid), exact, 1e-8);
  const auto r = fdd_check(ens, engine, {0, 1}, {f, f}, grid);
  EXPECT_LT(std::abs(r.z), 4.0);
  // Chart Euler gives the same law on flat models.
  c.scheme = Scheme::ChartEuler;
  const auto r2 = fdd_check(simulate(c, {0.3, 0.8}), {0, 1}, {f, f}, exact);
  EXPECT_LT(std::abs(r2.z), 4.0);
}

TEST(Fdd, SphereFirstHarmonic) {
  // cos d(x0, .) is an eigenfunction of (1/2) Delta with eigenvalue -1 on the unit sphere.
  const auto s2 = Manifold::sphere2();
  const auto c = config(s2, 0.7, 1e-3, 8000);
  const auto ens = simulate(c);
  const Point x0 = c.start;
  const TestFunction f = [&](PointRef y) { return std::cos(distance(s2, x0, y)); };
  const auto r = fdd_check(ens, {0}, {f}, std::exp(-0.7));
  EXPECT_LT(std::abs(r.mc - r.exact), 4 * r.std_error + 2e-3);
}

TEST(ChiSquare, DistanceLaw) {
  const auto e3 = Manifold::euclidean(3);
  const HeatKernelEngine engine(e3);
  const auto ens = simulate(config(e3, 1.0, 1.0, 5000));
  std::vector<double> d(ens.paths());
  for (long p = 0; p < ens.paths(); ++p) d[p] = ens.snapshots[0].col(p).norm();
  // Maxwell law of |X_1| in R^3, bins of width 0.5.
  std::vector<double> edges, probs;
  auto cdf = [](double r) { return std::erf(r / std::sqrt(2.0)) - std::sqrt(2.0 / kPi) * r * std::exp(-r * r / 2); };
  for (int b = 0; b <= 8; ++b) edges.push_back(0.5 * b);
  for (int b = 0; b < 8; ++b) probs.push_back((b == 7 ? 1.0 : cdf(edges[b + 1])) - cdf(edges[b]));
  edges.back() = kInf;
  EXPECT_TRUE(chi_square_test(d, edges, probs).pass);
  for (auto& x : d) x *= 1.1;
  const auto bad = chi_square_test(d, edges, probs);
  EXPECT_FALSE(bad.pass);
  EXPECT_EQ(bad.dof, 7);
}

TEST(FeynmanKac, ConstantAndIndicator) {
  const auto e1 = Manifold::euclidean(1);
  const auto c = config(e1, 1.0, 0.01, 4000);
  const TestFunction one = [](PointRef) { return 1.0; };
  const auto est = feynman_kac(c, Potential::constant(0.7), one);
  EXPECT_NEAR(est.value, std::exp(-0.7), 1e-12);
  EXPECT_EQ(est.capped_fraction, 0.0);
  // Killing by the indicator of [-1,1] is between e^{-1} and 1 and decreases with the strength.
  const Point lo = Point::Constant(1, -1.0), hi = Point::Constant(1, 1.0);
  const auto a = feynman_kac(c, Potential::indicator_box(lo, hi), one);
  const auto b = feynman_kac(c, Potential::scale(2.0, Potential::indicator_box(lo, hi)), one);
  EXPECT_GT(a.value, std::exp(-1.0));
  EXPECT_LT(a.value, 1.0);
  EXPECT_LT(b.value, a.value);
}

TEST(FeynmanKac, SingularPotentialIsCapped) {
  const auto e3 = Manifold::euclidean(3);
  auto c = config(e3, 0.5, 0.01, 500);
  const auto w = Potential::radial_power(origin(e3), 1.0);
  const auto est = feynman_kac(c, w, [](PointRef) { return 1.0; });
  EXPECT_EQ(est.capped_fraction, 1.0);  // the start sits on the singularity
  EXPECT_FALSE(est.warnings.empty());
  EXPECT_TRUE(std::isfinite(est.value));
  EXPECT_DOUBLE_EQ(est.cap_radius, 0.1);
}

TEST(Exponential, ConstantAndZero) {
  const auto e2 = Manifold::euclidean(2);
  const std::vector<Point> starts{origin(e2)};
  const std::vector<double> ts{0.25, 0.5, 1.0};
  const auto est = kato_exponential_estimate(e2, Potential::constant(0.8), starts, ts, {1.5, 2.0}, 200, 0.05, 3);
  ASSERT_EQ(est.rows.size(), 2u);
  for (const auto& r : est.rows) {
    EXPECT_NEAR(r.C, 0.8, 1e-12);
    EXPECT_NEAR(r.margin_min, std::log(r.delta), 1e-12);
  }
  const auto zero = kato_exponential_estimate(e2, Potential::constant(0.0), starts, ts, {2.0}, 50, 0.05, 3);
  EXPECT_EQ(zero.rows[0].C, 0.0);
}

TEST(Exponential, KatoBumpProperty) {
  // C(delta) is finite, margins are nonnegative and C decreases in delta.
  const auto e3 = Manifold::euclidean(3);
  const auto w = Potential::gaussian_bump(origin(e3), 0.5, 3.0);
  const std::vector<double> ts{0.1, 0.2, 0.4, 0.8};
  const auto est = kato_exponential_estimate(e3, w, {origin(e3), point_at_distance(e3, origin(e3), 0.5)}, ts,
                                             {1.5, 2.0, 4.0}, 2000, 0.01, 5);
  EXPECT_FALSE(est.overflow);
  double prev = kInf;
  for (const auto& r : est.rows) {
    EXPECT_TRUE(std::isfinite(r.C));
    EXPECT_GE(r.margin_min, -1e-12);
    EXPECT_LE(r.C, prev);
    prev = r.C;
  }
  for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_GE(est.sup_expectation[i], est.sup_expectation[i - 1]);
}

TEST(Projection, CircleTimesLine) {
  const auto prod = Manifold::product({Manifold::euclidean(1), Manifold::circle()});
  const HeatKernelEngine engine(prod);
  Point x(2);
  x << 0.3, 0.4;
  const auto w = Potential::sum({Potential::constant(1.0), Potential::cosine(1.0, 1)});
  ProjectionOptions opt;
  opt.paths = 4000;
  opt.seed = 21;
  opt.h_index = 0.05;
  opt.h_fiber = 0.05;
  const auto rep = elworthy_projection_check(engine, 1, w, x, opt);
  EXPECT_TRUE(rep.pass) << to_json(rep).dump();
  // Closed form of the right side: 1 + e^{-t/2} cos(0.4).
  EXPECT_NEAR(rep.rhs_quadrature, 1 + std::exp(-0.25) * std::cos(0.4), 1e-9);
  EXPECT_LT(std::abs(rep.defect_quadrature), 1e-6);
  EXPECT_THROW(elworthy_projection_check(HeatKernelEngine(Manifold::circle()), 0, w, Point::Zero(1), opt), DimensionMismatch);
}

TEST(Projection, EuclideanThreeTimesThree) {
  const auto e3 = Manifold::euclidean(3);
  const HeatKernelEngine engine(Manifold::product({e3, e3}));
  Point x = Point::Zero(6);
  x[4] = 0.3;
  const auto w = Potential::gaussian_bump(Eigen::Vector3d(0.4, 0, 0), 0.5, 2.0);
  ProjectionOptions opt;
  opt.t = 0.25;
  opt.paths = 20000;
  opt.seed = 5;
  opt.h_walk = 0.25;
  opt.h_index = 0.6;
  opt.h_fiber = 0.7;
  const auto rep = elworthy_projection_check(engine, 0, w, x, opt);
  EXPECT_TRUE(rep.pass) << to_json(rep).dump();
  // Gaussian convolution: E 2 e^{-|Y-c|^2/2w^2} = 2 (w^2/(w^2+t))^{3/2} e^{-|c|^2/2(w^2+t)} for Y ~ N(0, tI).
  const double s2 = 0.25 + 0.25;
  EXPECT_NEAR(rep.rhs_quadrature, 2 * std::pow(0.25 / s2, 1.5) * std::exp(-0.16 / (2 * s2)), 1e-4);
}

TEST(Completeness, MassStaysOne) {
  for (const auto& m : {Manifold::euclidean(3), Manifold::hyperbolic3(), Manifold::sphere2()}) {
    const HeatKernelEngine engine(m);
    const auto rows = stochastic_completeness_probe(engine, origin(m), {0.25, 1.0}, 2000, 0.01, 4);
    for (const auto& r : rows) {
      EXPECT_NEAR(r.mc, 1.0, 4 * r.std_error + 1e-3) << m.spec() << " t=" << r.t;
      EXPECT_LT(r.mass_defect, 1e-6);
    }
  }
}
