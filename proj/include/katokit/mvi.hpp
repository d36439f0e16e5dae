#pragma once

// Parabolic L^q mean value inequality on heat-kernel columns u(s,y) = p(s,y,y0):
//
//   u(t,x)^q <= C / (a^{m/2} tau^{1+m/2}) int_{t-tau}^t int_{B(x,r)} u(s,y)^q dy ds
//
// measured as C_emp = sup over a sweep of u(t,x)^q a^{m/2} tau^{1+m/2} / (space-time integral).

#include <cmath>
#include <string>
#include <vector>

#include "axial.hpp"
#include "faber_krahn.hpp"
#include "heat_kernel.hpp"
#include "json.hpp"
#include "numerics.hpp"

namespace katokit {

struct MviConfig {
  int m = 2;
  double r = 1.0;
  double a = 0.0;  // 0: the Euclidean Faber-Krahn constant
  std::vector<double> tau_fractions{0.25, 0.5, 0.75, 1.0};  // tau = fraction * r^2
  std::vector<double> t_factors{1.25, 2.0, 4.0};            // t = factor * tau
  std::vector<double> qs{1.0, 1.5, 2.0};
  std::vector<double> source_offsets{0.0, 0.5, 2.0};        // |y0 - x| = offset * r
  int time_panels = 4;
  int order = 8;
};

struct MviCell {
  double tau = 0, t = 0, q = 0, offset = 0;
  double lhs = 0;       // u(t,x)^q
  double integral = 0;  // int int u^q
  double ratio = 0;
};

struct MviReport {
  int m = 0;
  double C_emp = 0.0;
  double C_emp_refined = 0.0;     // quadrature orders and panels doubled
  double C_emp_tau_halved = 0.0;  // tau grid extended by tau / 2
  double refinement_change = 0.0;
  double tau_change = 0.0;
  std::size_t skipped = 0;
  std::vector<MviCell> cells;
  bool finite = true;
  bool pass = false;  // finite, positive, stable within 10% under both refinements
};

inline nlohmann::json to_json(const MviReport& r) {
  return {{"m", r.m},
          {"C_emp", json_number(r.C_emp)},
          {"C_emp_refined", json_number(r.C_emp_refined)},
          {"C_emp_tau_halved", json_number(r.C_emp_tau_halved)},
          {"refinement_change", r.refinement_change},
          {"tau_change", r.tau_change},
          {"cells", r.cells.size()},
          {"skipped", r.skipped},
          {"verdict", r.pass ? "PASS" : "FAIL"}};
}

namespace detail {

// int_{t-tau}^t int_{B(x,r)} p(s, y, y0)^q dy ds with rho = |x - y0|.
inline double mvi_space_time(const HeatKernelEngine& engine, double rho, double r, double t, double tau, double q,
                             int panels, int order) {
  const Manifold& model = engine.model();
  const double t0 = t - tau;
  double total = 0.0;
  const GaussRule& rule = gauss_legendre(order);
  for (int k = 0; k < panels; ++k) {
    const double a = t0 + tau * k / panels, b = t0 + tau * (k + 1) / panels;
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double panel = 0.0;
    for (int i = 0; i < order; ++i) {
      const double s = mid + half * rule.nodes[i];
      AxialSpec spec;
      spec.r_max = r;
      spec.sigma = std::sqrt(s / q);
      spec.center_scale = r;
      spec.h_max = std::min(0.5 * r, 0.5) * 8.0 / order;
      spec.order = order;
      const double v = axial_integrate(model, rho, [&](double, double d) {
        return std::pow(engine.eval_distance(s, d).value, q);
      }, spec);
      panel += rule.weights[i] * v;
    }
    total += panel * half;
  }
  return total;
}

inline double mvi_sup(const HeatKernelEngine& engine, const MviConfig& c, double a, const std::vector<double>& taus,
                      int panels, int order, std::vector<MviCell>* cells, std::size_t* skipped, bool* finite) {
  const int m = c.m;
  double best = 0.0;
  for (double tau : taus)
    for (double tf : c.t_factors)
      for (double q : c.qs)
        for (double off : c.source_offsets) {
          MviCell cell;
          cell.tau = tau;
          cell.t = tf * tau;
          cell.q = q;
          cell.offset = off;
          const double rho = off * c.r;
          cell.lhs = std::pow(engine.eval_distance(cell.t, rho).value, q);
          cell.integral = mvi_space_time(engine, rho, c.r, cell.t, tau, q, panels, order);
          if (cell.integral == 0.0 && cell.lhs == 0.0) {
            if (skipped) ++*skipped;
            continue;
          }
          cell.ratio = cell.lhs * std::pow(a, 0.5 * m) * std::pow(tau, 1.0 + 0.5 * m) / cell.integral;
          if (finite && !(std::isfinite(cell.ratio) && cell.ratio > 0)) *finite = false;
          best = std::max(best, cell.ratio);
          if (cells) cells->push_back(cell);
        }
  return best;
}

}  // namespace detail

inline MviReport mvi_sweep(const MviConfig& c) {
  if (c.m != 2 && c.m != 3) throw UnsupportedModel("mvi sweep runs on Euclidean(2) and Euclidean(3)");
  for (double q : c.qs)
    if (q < 1.0 || q > 2.0) throw DomainError("mvi sweep needs q in [1,2]");
  for (double f : c.tau_fractions)
    if (!(f > 0 && f <= 1.0)) throw DomainError("tau must lie in (0, r^2]");
  for (double f : c.t_factors)
    if (f < 1.0) throw DomainError("t must be at least tau");
  const HeatKernelEngine engine(Manifold::euclidean(c.m));
  const double a = c.a > 0 ? c.a : euclidean_faber_krahn_constant(c.m);
  MviReport rep;
  rep.m = c.m;
  std::vector<double> taus, taus_halved;
  for (double f : c.tau_fractions) {
    taus.push_back(f * c.r * c.r);
    taus_halved.push_back(f * c.r * c.r);
    taus_halved.push_back(0.5 * f * c.r * c.r);
  }
  rep.C_emp = detail::mvi_sup(engine, c, a, taus, c.time_panels, c.order, &rep.cells, &rep.skipped, &rep.finite);
  rep.C_emp_refined = detail::mvi_sup(engine, c, a, taus, 2 * c.time_panels, std::min(kMaxGaussOrder, 2 * c.order), nullptr, nullptr, &rep.finite);
  rep.C_emp_tau_halved = detail::mvi_sup(engine, c, a, taus_halved, c.time_panels, c.order, nullptr, nullptr, &rep.finite);
  rep.refinement_change = std::abs(rep.C_emp_refined / rep.C_emp - 1.0);
  rep.tau_change = std::abs(rep.C_emp_tau_halved / rep.C_emp - 1.0);
  rep.pass = rep.finite && rep.C_emp > 0 && rep.refinement_change <= 0.1 && rep.tau_change <= 0.1;
  return rep;
}

}  // namespace katokit
