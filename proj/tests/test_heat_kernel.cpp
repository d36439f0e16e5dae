#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "katokit/heat_kernel.hpp"

using namespace katokit;

namespace {

Point random_point(const Manifold& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  switch (model.kind()) {
    case ModelKind::Sphere2:
      return Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    case ModelKind::Hyperbolic3:
      return Eigen::Vector3d(u(rng), u(rng), std::exp(0.5 * u(rng)));
    case ModelKind::Circle:
      return Point::Constant(1, M_PI * (1 + u(rng)));
    case ModelKind::Torus: {
      Point p(model.dim());
      for (int i = 0; i < p.size(); ++i) p[i] = 0.5 * model.side() * (1 + u(rng));
      return p;
    }
    case ModelKind::Product: {
      Point p(model.chart_dim());
      for (std::size_t i = 0; i < model.factors().size(); ++i)
        p.segment(model.factor_offset(i), model.factors()[i].chart_dim()) = random_point(model.factors()[i], rng);
      return p;
    }
    default: {
      Point p(model.dim());
      for (int i = 0; i < p.size(); ++i) p[i] = u(rng);
      return p;
    }
  }
}

std::vector<Manifold> six_models() {
  return {Manifold::euclidean(3), Manifold::torus(2), Manifold::circle(), Manifold::sphere2(), Manifold::hyperbolic3(),
          Manifold::product({Manifold::circle(), Manifold::euclidean(1)})};
}

}  // namespace

TEST(HeatKernel, EuclideanDiagonalMatchesFourierInversion) {
  // p(t, 0) = (2 pi)^-3 int_R^3 exp(-t |k|^2 / 2) dk, evaluated radially.
  const double t = 1.0;
  auto radial = integrate_to_infinity([&](double k) { return 4 * M_PI * k * k * std::exp(-0.5 * t * k * k); }, 0.0);
  const double oracle = radial.value / std::pow(2 * M_PI, 3);
  HeatKernelEngine e(Manifold::euclidean(3));
  const Point o = Point::Zero(3);
  EXPECT_NEAR(e.eval(t, o, o), oracle, 1e-12);
  EXPECT_NEAR(e.eval(t, o, o), 0.063494, 5e-7);
}

TEST(HeatKernel, ProductOfLinesIsThePlane) {
  HeatKernelEngine plane(Manifold::euclidean(2));
  HeatKernelEngine lines(Manifold::product({Manifold::euclidean(1), Manifold::euclidean(1)}));
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Point x = random_point(Manifold::euclidean(2), rng), y = random_point(Manifold::euclidean(2), rng);
    const double a = plane.eval(0.3, x, y), b = lines.eval(0.3, x, y);
    EXPECT_NEAR(a, b, 1e-14 * a);
  }
}

TEST(HeatKernel, SphereLongTimeIsUniform) {
  HeatKernelEngine e(Manifold::sphere2());
  const Point n = Eigen::Vector3d(0, 0, 1), s = Eigen::Vector3d(0.6, 0, -0.8);
  // Oracle: direct summation of the first terms (l <= 3 is far beyond double precision at t = 50).
  double oracle = 0.0;
  const double x = n.dot(s);
  const double P[4] = {1.0, x, 0.5 * (3 * x * x - 1), 0.5 * (5 * x * x * x - 3 * x)};
  for (int l = 0; l < 4; ++l) oracle += (2 * l + 1) / (4 * M_PI) * std::exp(-0.5 * l * (l + 1) * 50.0) * P[l];
  EXPECT_NEAR(e.eval(50.0, n, s), oracle, 1e-15);
  EXPECT_NEAR(e.eval(50.0, n, s), 1 / (4 * M_PI), 1e-10);
}

TEST(HeatKernel, DomainAndTruncationErrors) {
  HeatKernelEngine e(Manifold::euclidean(2));
  EXPECT_THROW(e.eval(0.0, Point::Zero(2), Point::Zero(2)), DomainError);
  EXPECT_THROW(e.eval(-1.0, Point::Zero(2), Point::Zero(2)), DomainError);
  HeatKernelEngine coarse(Manifold::sphere2(), KernelMethod::parse("series:5"));
  try {
    coarse.eval(0.01, Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, 1));
    FAIL() << "expected truncation error";
  } catch (const TruncationError& err) {
    EXPECT_GT(err.bound(), 1e-12);
  }
  EXPECT_THROW(HeatKernelEngine(Manifold::euclidean(3), KernelMethod::parse("series:10")), UnsupportedModel);
  EXPECT_THROW(KernelMethod::parse("bogus"), DomainError);
}

TEST(HeatKernel, CircleImageSumAgreesWithFourierSeries) {
  HeatKernelEngine images(Manifold::circle());
  HeatKernelEngine fourier(Manifold::circle(), KernelMethod::parse("series"));
  HeatKernelEngine wide(Manifold::circle(), KernelMethod::parse("imagesum:20"));
  for (double t : {0.01, 0.1, 1.0, 10.0})
    for (double th : {0.0, 0.5, 2.0, M_PI}) {
      const Point a = Point::Constant(1, 0.0), b = Point::Constant(1, th);
      EXPECT_NEAR(images.eval(t, a, b), fourier.eval(t, a, b), 1e-12 * std::max(1.0, images.eval(t, a, b)));
      EXPECT_NEAR(images.eval(t, a, b), wide.eval(t, a, b), 1e-13 * std::max(1.0, images.eval(t, a, b)));
    }
}

TEST(SupBound, Examples) {
  HeatKernelEngine e3(Manifold::euclidean(3));
  const Point o = Point::Zero(3);
  const auto g = build_grid(Manifold::euclidean(3), 0.1, Window::cube(3, 1.0));
  const auto s = sup_bound(e3, 0.2, o, g);
  EXPECT_TRUE(s.verified);
  EXPECT_NEAR(s.diagonal, std::pow(2 * M_PI * 0.2, -1.5), 1e-14);
  EXPECT_LE(s.grid_max, s.diagonal);

  HeatKernelEngine h3(Manifold::hyperbolic3());
  const Point x = Eigen::Vector3d(0, 0, 1);
  const Point y = Eigen::Vector3d(0, 0, std::exp(1e-8));
  EXPECT_NEAR(h3.eval(0.5, x, x), std::pow(M_PI, -1.5) * std::exp(-0.25), 1e-15);
  EXPECT_NEAR(h3.eval(0.5, x, y), h3.eval(0.5, x, x), 1e-14);

  // Grid containing x: the max is the diagonal value.
  HeatKernelEngine c(Manifold::circle());
  const auto cg = build_grid(Manifold::circle(), 2 * M_PI / 100);
  const auto cs = sup_bound(c, 0.1, Point::Constant(1, 0.0), cg);
  EXPECT_EQ(cs.grid_max, cs.diagonal);
}

TEST(Consistency, CircleMassAndEuclideanCK) {
  HeatKernelEngine c(Manifold::circle());
  const auto rep = check_consistency(c, {0.05, 0.5, 3.0}, {Point::Constant(1, 0.3), Point::Constant(1, 4.0)});
  EXPECT_LT(rep.mass_defect, 1e-10);
  EXPECT_EQ(rep.symmetry_residual, 0.0);

  HeatKernelEngine e2(Manifold::euclidean(2));
  const double t = 0.1, s = 0.2;
  const double sig = std::sqrt(t + s);
  const auto grid = build_grid(Manifold::euclidean(2), 0.02, Window::cube(2, 6 * sig + 0.5));
  const auto rep2 = check_consistency(e2, {t, s}, {Eigen::Vector2d(0, 0), Eigen::Vector2d(0.3, -0.2)}, &grid);
  EXPECT_LT(rep2.ck_residual, 1e-6);
  EXPECT_LT(rep2.mass_defect, 1e-6);
  EXPECT_EQ(rep2.symmetry_residual, 0.0);
  EXPECT_EQ(rep2.route, "grid");
}

TEST(Consistency, AllModelsRandomSamples) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ut(0.05, 1.0);
  for (const auto& model : six_models()) {
    HeatKernelEngine e(model);
    std::vector<double> ts;
    std::vector<Point> xs;
    for (int k = 0; k < 4; ++k) ts.push_back(ut(rng));
    for (int k = 0; k < 5; ++k) xs.push_back(random_point(model, rng));
    const auto rep = check_consistency(e, ts, xs);
    const bool series = model.kind() == ModelKind::Sphere2;
    EXPECT_LT(rep.ck_residual, series ? 1e-4 : 1e-6) << model.spec();
    EXPECT_LT(rep.mass_defect, 1e-6) << model.spec();
    EXPECT_LE(rep.symmetry_residual, std::max(rep.truncation_bound, 0.0)) << model.spec();
  }
}

TEST(Properties, PositivitySymmetrySquareRootBound) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ut(0.001, 3.0);
  for (const auto& model : six_models()) {
    HeatKernelEngine e(model);
    for (int k = 0; k < 100; ++k) {
      const double t = ut(rng);
      const Point x = random_point(model, rng), y = random_point(model, rng);
      const KernelValue v = e.eval_with_bound(t, x, y);
      EXPECT_GT(v.value, 0.0) << model.spec();
      EXPECT_LE(std::abs(v.value - e.eval(t, y, x)), v.truncation_bound) << model.spec();
      const double bound = std::sqrt(e.eval(t, x, x)) * std::sqrt(e.eval(t, y, y));
      EXPECT_LE(v.value, bound * (1 + 1e-12) + v.truncation_bound) << model.spec();
    }
  }
}

TEST(Properties, ProductFactorizationIsExact) {
  const Manifold m = Manifold::product({Manifold::sphere2(), Manifold::circle()});
  HeatKernelEngine e(m);
  HeatKernelEngine s(Manifold::sphere2()), c(Manifold::circle());
  std::mt19937_64 rng(4);
  for (int k = 0; k < 30; ++k) {
    const Point x = random_point(m, rng), y = random_point(m, rng);
    EXPECT_EQ(e.eval(0.4, x, y), s.eval(0.4, x.head(3), y.head(3)) * c.eval(0.4, x.tail(1), y.tail(1)));
  }
}

TEST(OnDiagonal, Examples) {
  const auto e3 = on_diag_upper(HeatKernelEngine(Manifold::euclidean(3)));
  EXPECT_NEAR(e3.constant, std::pow(2 * M_PI, -1.5), 1e-15);
  const auto h3 = on_diag_upper(HeatKernelEngine(Manifold::hyperbolic3()));
  EXPECT_LE(h3.constant, std::pow(2 * M_PI, -1.5));
  const auto s2 = on_diag_upper(HeatKernelEngine(Manifold::sphere2()));
  EXPECT_TRUE(std::isfinite(s2.constant));
  EXPECT_GT(s2.constant, 1 / (2 * M_PI));  // short-time limit from above
  EXPECT_LT(s2.constant, 1.0);
}

TEST(TailMass, EuclideanBoxIsExact) {
  HeatKernelEngine e(Manifold::euclidean(1));
  Eigen::VectorXd lo(1), hi(1);
  lo << -1.0;
  hi << 1.0;
  const double t = 0.5;
  EXPECT_NEAR(kernel_tail_mass(e, t, Point::Zero(1), Window::box(lo, hi)), std::erfc(1.0), 1e-15);
  HeatKernelEngine h(Manifold::hyperbolic3());
  const double tail = kernel_tail_mass(h, 0.3, Eigen::Vector3d(0, 0, 1), Window::ball(Eigen::Vector3d(0, 0, 1), 1.0));
  auto f = [&](double r) { return h.eval_distance(0.3, r).value * sphere_area(h.model(), r); };
  EXPECT_NEAR(tail, 1.0 - integrate_adaptive(f, 0.0, 1.0).value, 1e-10);
}

TEST(Report, JsonHasAllFields) {
  HeatKernelEngine c(Manifold::circle());
  const auto rep = check_consistency(c, {0.5}, {Point::Constant(1, 0.0)});
  const auto j = to_json(rep);
  for (const char* key : {"mass_defect", "ck_residual", "symmetry_residual", "truncation_bound"})
    EXPECT_TRUE(j.contains(key)) << key;
}
