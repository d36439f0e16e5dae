#include <gtest/gtest.h>

#include "katokit/mvi.hpp"

using namespace katokit;

TEST(Mvi, SpaceTimeIntegralOracle) {
  // 2D, q = 1, source at the center: int_B p(s, y, x) dy = 1 - e^{-r^2 / 2s}.
  const HeatKernelEngine e(Manifold::euclidean(2));
  const double r = 0.7, t = 0.6, tau = 0.4;
  const double got = detail::mvi_space_time(e, 0.0, r, t, tau, 1.0, 4, 8);
  const double want = integrate_adaptive([&](double s) { return 1.0 - std::exp(-r * r / (2 * s)); }, t - tau, t, 1e-14, 1e-13).value;
  EXPECT_NEAR(got / want, 1.0, 1e-9);
  // q = 2: p^2 = (2 pi s)^{-2} e^{-|y|^2/s}, so int_B p^2 = (1 - e^{-r^2/s}) / (4 pi s).
  const double got2 = detail::mvi_space_time(e, 0.0, r, t, tau, 2.0, 4, 8);
  const double want2 = integrate_adaptive([&](double s) { return (1.0 - std::exp(-r * r / s)) / (4 * kPi * s); }, t - tau, t, 1e-14, 1e-13).value;
  EXPECT_NEAR(got2 / want2, 1.0, 1e-9);
  // Off-center source in 3D against a brute force box sum.
  const HeatKernelEngine e3(Manifold::euclidean(3));
  const double rho = 0.5;
  const double axial = detail::mvi_space_time(e3, rho, 1.0, 1.0, 0.5, 1.5, 4, 8);
  const auto grid = build_grid(e3.model(), 0.05, Window::ball(Eigen::Vector3d::Zero(), 1.0));
  const Eigen::Vector3d y0(rho, 0, 0);
  double brute = 0.0;
  const GaussRule& g = gauss_legendre(8);
  for (int i = 0; i < 8; ++i) {
    const double s = 0.75 + 0.25 * g.nodes[i];
    brute += 0.25 * g.weights[i] * grid.integrate([&](PointRef y) { return std::pow(e3.eval(s, y, y0), 1.5); });
  }
  EXPECT_NEAR(axial / brute, 1.0, 1e-3);
}

TEST(Mvi, SweepStableAndBounded) {
  for (int m : {2, 3}) {
    MviConfig c;
    c.m = m;
    const auto rep = mvi_sweep(c);
    EXPECT_TRUE(rep.pass) << m << " " << rep.refinement_change << " " << rep.tau_change;
    EXPECT_GE(rep.C_emp_tau_halved, rep.C_emp);  // sup over a larger sweep
    for (const auto& cell : rep.cells) EXPECT_LE(cell.ratio, rep.C_emp);
    EXPECT_EQ(rep.skipped, 0u);
  }
}

TEST(Mvi, ZeroSolutionSkipped) {
  // A source far outside the reach of the kernel gives u = 0 at double precision.
  MviConfig c;
  c.m = 2;
  c.source_offsets = {400.0};
  c.qs = {1.0};
  c.tau_fractions = {0.25};
  c.t_factors = {1.25};
  const auto rep = mvi_sweep(c);
  EXPECT_EQ(rep.skipped, 1u);
  EXPECT_THROW(([] { MviConfig bad; bad.qs = {3.0}; mvi_sweep(bad); })(), DomainError);
}
