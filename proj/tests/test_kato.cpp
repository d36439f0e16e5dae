#include <gtest/gtest.h>

#include "katokit/kato.hpp"

using namespace katokit;

namespace {

Point p3(double a, double b, double c) { return Eigen::Vector3d(a, b, c); }

}  // namespace

TEST(ControlPair, CertificatesMatchClosedForm) {
  for (int m : {1, 2, 3}) {
    KatoControlPair p;
    p.dim = m;
    p.tilde_power = 0.5 * m;
    for (double q : {0.5 * m + 0.1, 2.0, 5.0, 1.0}) {
      if (!admissible_q(q, m)) {
        EXPECT_TRUE(std::isinf(tilde_integral(p, q)));
        continue;
      }
      EXPECT_NEAR(tilde_integral(p, q), 1.0 / (1.0 - m / (2.0 * q)), 1e-12) << m << " " << q;
    }
  }
  KatoControlPair one;
  one.dim = 1;
  one.tilde_power = 0.5;
  EXPECT_NEAR(tilde_integral(one, 1.0), 2.0, 1e-14);
  // Offset form against plain adaptive quadrature away from 0 plus the explicit head.
  KatoControlPair fk;
  fk.dim = 2;
  fk.tilde_power = 1.0;
  fk.tilde_scale = 3.0;
  fk.tilde_offset = 1.0;
  const double q = 2.0, eps = 1e-10;
  const double head = std::sqrt(3.0) * 2.0 * std::sqrt(eps);  // int_0^eps (3/s)^{1/2}, offset negligible
  const double body = integrate_adaptive([](double s) { return std::sqrt(3.0 / s + 1.0); }, eps, 1.0, 1e-14, 1e-13).value;
  EXPECT_NEAR(tilde_integral(fk, q), head + body, 1e-8);
}

TEST(ControlPair, OnDiagonalEuclideanIsExact) {
  const HeatKernelEngine e(Manifold::euclidean(3));
  const auto pair = control_pair_from_on_diag(e);
  EXPECT_NEAR(*pair.I_constant / std::pow(2 * kPi, -1.5), 1.0, 1e-14);
  const auto v = verify_control_pair(e, pair, log_spaced(1e-4, 1.0, 20), sample_points(e.model()));
  EXPECT_TRUE(v.pass) << v.margin_min;
  EXPECT_NEAR(pair.certificates.at(2.0), 4.0, 1e-12);  // 1/(1 - 3/4)
}

TEST(ControlPair, SphereOnDiagonal) {
  const HeatKernelEngine e(Manifold::sphere2());
  const auto pair = control_pair_from_on_diag(e);
  // t p(t,x,x) ~ 1/(2 pi) + t/(6 pi) for small t.
  EXPECT_GT(*pair.I_constant, 1.0 / (2 * kPi));
  const auto v = verify_control_pair(e, pair, log_spaced(1e-3, 1.0, 12), sample_points(e.model()));
  EXPECT_TRUE(v.pass) << v.margin_min;
  for (const auto& [q, c] : pair.certificates) EXPECT_TRUE(std::isfinite(c)) << q;
}

TEST(ControlPair, LiYauHyperbolicAndEuclidean) {
  const auto ts = log_spaced(1e-4, 1.0, 50);
  const HeatKernelEngine h(Manifold::hyperbolic3());
  const auto xs = sample_points(h.model());
  const auto pair = control_pair_li_yau(h, ts, xs);
  const auto v = verify_control_pair(h, pair, ts, xs);
  EXPECT_TRUE(v.pass) << v.margin_min;
  // p(t,x,x) t^{3/2} = (2 pi)^{-3/2} e^{-t/2} peaks as t -> 0.
  EXPECT_NEAR(pair.empirical["C5"].get<double>() / (std::pow(2 * kPi, -1.5) * kPi * (std::sinh(2.0) - 2.0)), 1.0, 1e-5);
  const HeatKernelEngine e(Manifold::euclidean(3));
  const auto pe = control_pair_li_yau(e, ts, sample_points(e.model()));
  EXPECT_NEAR(*pe.I_constant / std::pow(2 * kPi, -1.5), 1.0, 1e-12);
}

TEST(ControlPair, VolumeDoubling) {
  const std::vector<double> radii{0.1, 0.3, 1.0, 2.0, 4.0};
  for (const auto& m : {Manifold::euclidean(3), Manifold::hyperbolic3(), Manifold::sphere2()}) {
    const auto r = volume_doubling_check(m, origin(m), radii);
    EXPECT_TRUE(r.pass) << m.spec() << " " << r.margin_min;
  }
}

TEST(KatoFunctional, ConstantAndZero) {
  for (const auto& m : {Manifold::euclidean(3), Manifold::sphere2(), Manifold::circle(), Manifold::hyperbolic3()}) {
    const KatoIntegrator integ(HeatKernelEngine(m), Potential::constant(2.5));
    for (double t : {0.05, 0.4}) EXPECT_NEAR(kato_functional(integ, t) / (2.5 * t), 1.0, 1e-6) << m.spec() << " " << t;
    const KatoIntegrator zero(HeatKernelEngine(m), Potential::constant(0.0));
    EXPECT_EQ(kato_functional(zero, 0.1), 0.0);
  }
  // Torus goes through the grid route.
  const KatoIntegrator torus(HeatKernelEngine(Manifold::torus(2)), Potential::constant(2.0), {1e-3, 6, 0.1, 7});
  EXPECT_EQ(torus.route(), "grid");
  EXPECT_NEAR(kato_functional(torus, 0.2) / 0.4, 1.0, 1e-6);
}

TEST(KatoFunctional, InverseDistanceScaling) {
  // E|B_s|^{-1} = sqrt(2/(pi s)) in R^3, so N(t) = 2 sqrt(2t/pi) at the center.
  const KatoIntegrator integ(HeatKernelEngine(Manifold::euclidean(3)), Potential::radial_power(p3(0, 0, 0), 1.0));
  const auto curve = kato_curve(integ, {0.1, 0.01});
  for (const auto& p : curve.points) {
    EXPECT_NEAR(p.value / (2 * std::sqrt(2 * p.t / kPi)), 1.0, 1e-5) << p.t;
    EXPECT_GE(p.upper, p.value * (1 - 1e-9));
    EXPECT_NEAR(p.alpha, 0.5, 0.01);
  }
  EXPECT_NEAR(curve.points[1].value / curve.points[0].value, std::sqrt(0.1), 1e-5);
}

TEST(KatoFunctional, Monotone) {
  const auto e3 = Manifold::euclidean(3);
  const auto w = Potential::sum({Potential::indicator_ball(p3(0, 0, 0), 0.5), Potential::gaussian_bump(p3(0, 0, 0), 0.3)});
  const KatoIntegrator a(HeatKernelEngine(e3), w);
  const KatoIntegrator b(HeatKernelEngine(e3), Potential::scale(1.3, w));
  double prev = 0.0;
  for (double t : {0.01, 0.03, 0.1, 0.3}) {
    const double n = kato_functional(a, t);
    EXPECT_GE(n, prev);
    EXPECT_GE(kato_functional(b, t), n);
    prev = n;
  }
}

TEST(IsKato, Verdicts) {
  const auto e3 = Manifold::euclidean(3);
  const HeatKernelEngine e(e3);
  const auto ts = dyadic_times(0.5, 8);
  const auto bounded = is_kato(KatoIntegrator(e, Potential::indicator_ball(p3(0, 0, 0), 1.0)), ts);
  EXPECT_TRUE(bounded.pass) << bounded.reason;
  EXPECT_NEAR(bounded.fit.exponent, 1.0, 0.1);
  const auto coul = is_kato(KatoIntegrator(e, Potential::coulomb(p3(0, 0, 0), std::make_shared<CoulombTable>(e))), ts);
  EXPECT_TRUE(coul.pass) << coul.reason;
  EXPECT_NEAR(coul.fit.exponent, 0.5, 0.1);
  const auto sq = is_kato(KatoIntegrator(e, Potential::radial_power(p3(0, 0, 0), 2.0)), ts);
  EXPECT_FALSE(sq.pass);
  EXPECT_NE(sq.verdict.find("numerical evidence"), std::string::npos);
  const auto zero = is_kato(KatoIntegrator(e, Potential::constant(0)), ts);
  EXPECT_TRUE(zero.pass);
}

TEST(Holder, BoundAndWeightedInclusion) {
  const HeatKernelEngine e(Manifold::euclidean(3));
  const auto pair = control_pair_from_on_diag(e);
  const auto ss = log_spaced(1e-3, 1.0, 10);
  const auto zero = holder_bound_check(KatoIntegrator(e, Potential::constant(0)), pair, 2.0, ss);
  EXPECT_EQ(zero.margin_min, 0.0);
  const KatoIntegrator ind(e, Potential::indicator_ball(p3(0, 0, 0), 1.0));
  const auto rep = holder_bound_check(ind, pair, 2.0, ss);
  EXPECT_TRUE(rep.pass);
  EXPECT_GE(rep.margin_min, 0.0);
  EXPECT_NEAR(rep.norm, std::sqrt(*pair.I_constant * 4 * kPi / 3), 1e-10);
  // Integrated form: N(t) <= (int_0^t Itilde^{1/q}) ||w||.
  for (double t : {0.05, 0.5}) EXPECT_LE(kato_functional(ind, t), tilde_integral(pair, 2.0, t) * rep.norm);
  // Constant w on the sphere with the on-diagonal pair.
  const HeatKernelEngine s(Manifold::sphere2());
  const auto ps = control_pair_from_on_diag(s);
  for (double q : {1.1, 2.0, 5.0}) EXPECT_TRUE(holder_bound_check(KatoIntegrator(s, Potential::constant(1.7)), ps, q, ss).pass) << q;
  // m = 1, q = 1: the pointwise bound int p |w| <= Itilde(s) int |w| I.
  const HeatKernelEngine e1(Manifold::euclidean(1));
  const auto p1 = control_pair_from_on_diag(e1);
  Eigen::VectorXd c(1);
  c << 0.2;
  EXPECT_TRUE(holder_bound_check(KatoIntegrator(e1, Potential::gaussian_bump(c, 0.1)), p1, 1.0, ss).pass);
}

TEST(Classical, ExamplesAndAgreement) {
  const auto e3 = Manifold::euclidean(3);
  const std::vector<Point> xs{p3(0, 0, 0), p3(0.1, 0, 0)};
  // Bounded: int_0^r s^{-1} 4 pi s^2 ds = 2 pi r^2 at the center.
  const auto one = Potential::indicator_ball(p3(0, 0, 0), 5.0);
  EXPECT_NEAR(classical_kato_functional(e3, one, 0.3, {p3(0, 0, 0)}), 2 * kPi * 0.09, 1e-8);
  // 1/|y|: 4 pi r.
  const auto coul = Potential::radial_power(p3(0, 0, 0), 1.0);
  EXPECT_NEAR(classical_kato_functional(e3, coul, 0.2, xs), 4 * kPi * 0.2, 1e-6);
  EXPECT_TRUE(std::isinf(classical_kato_functional(e3, Potential::radial_power(p3(0, 0, 0), 2.0), 0.2, xs)));
  EXPECT_THROW(classical_kato_functional(Manifold::euclidean(1), coul, 0.2, xs), UnsupportedModel);
  const HeatKernelEngine e(e3);
  const std::vector<double> radii{0.5, 0.25, 0.125, 0.0625};
  for (double beta : {0.5, 1.0, 1.5, 2.0}) {
    const auto w = Potential::radial_power(p3(0, 0, 0), beta, 1.0);
    const bool classical = classical_is_kato(e3, w, radii, xs).pass;
    const bool heat = is_kato(KatoIntegrator(e, w), dyadic_times(0.5, 8)).pass;
    EXPECT_EQ(classical, heat) << beta;
    EXPECT_EQ(heat, beta < 2.0) << beta;
  }
  Eigen::VectorXd c(1);
  c << 0.0;
  EXPECT_TRUE(std::isfinite(uniform_local_l1(Potential::radial_power(c, 0.5), {c})));
  EXPECT_TRUE(std::isinf(uniform_local_l1(Potential::radial_power(c, 1.0), {c})));
}
