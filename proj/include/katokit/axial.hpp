#pragma once

// Reduced quadrature on isotropic models.  For a center c, a point x at distance rho from c and
// an integrand depending only on (d(y,c), d(y,x)), geodesic polar coordinates around c give
//
//   int_M f(d(y,c), d(y,x)) dmu(y) = int_0^rmax A(r) int_0^pi c_m sin^{m-2}(theta) f(r, d(r,rho,theta)) dtheta dr
//
// with A(r) the area of the geodesic sphere of radius r.

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "numerics.hpp"

namespace katokit {

struct AxialSpec {
  double r_max = kInf;           // radial cutoff, clipped to the model's max radius
  double r_min = 0.0;            // integrand known to vanish below this radius
  double sigma = 1.0;            // length scale of the integrand around x
  double center_scale = 1.0;     // length scale around c
  bool center_singular = false;  // integrand ~ r^{-beta} at c
  double singular_exponent = 0.0;
  double excision = 1e-9;        // below this radius the singular piece uses a power substitution
  std::vector<double> breakpoints;
  double h_max = 0.5;
  int order = 8;
};

namespace detail {

template <class F>
double angular_average(const Manifold& model, double r, double rho, double sigma, int order, F& f) {
  const int m = model.dim();
  if (m == 1) return 0.5 * (f(r, axial_distance(model, r, rho, 0.0)) + f(r, axial_distance(model, r, rho, kPi)));
  if (rho == 0.0 || r == 0.0) return f(r, r == 0.0 ? rho : r);
  const double spread = std::sqrt(warp(model, r) * warp(model, rho));
  const double theta1 = spread > 0 ? std::min(kPi / 4, sigma / spread) : kPi / 4;
  const PanelFeature feature{0.0, theta1, false, 0.0};
  const auto edges = panel_edges(0.0, kPi, std::span<const PanelFeature>(&feature, 1), kPi / 4);
  const GaussRule& rule = gauss_legendre(order);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double half = 0.5 * (edges[i + 1] - edges[i]);
    const double mid = 0.5 * (edges[i + 1] + edges[i]);
    double panel = 0.0;
    for (int k = 0; k < order; ++k) {
      const double th = mid + half * rule.nodes[k];
      const double jac = m == 2 ? 1.0 / kPi : 0.5 * std::sin(th);
      panel += rule.weights[k] * jac * f(r, axial_distance(model, r, rho, th));
    }
    total += panel * half;
  }
  return total;
}

}  // namespace detail

/// int_M f(d(y,c), d(y,x)) dmu(y) for d(x,c) = rho on an isotropic model.
template <class F>
double axial_integrate(const Manifold& model, double rho, F&& f, const AxialSpec& spec) {
  if (!model.isotropic()) throw UnsupportedModel("axial quadrature needs an isotropic model, got " + model.spec());
  if (model.dim() > 3) throw UnsupportedModel("axial quadrature is implemented up to dimension 3");
  const double r_max = std::min(spec.r_max, max_radius(model));
  if (!(r_max > 0) || spec.r_min >= r_max) return 0.0;
  std::vector<PanelFeature> features;
  const bool singular = spec.center_singular && spec.r_min <= 0.0;
  const double lo = spec.r_min > 0.0 ? spec.r_min : (singular ? std::min(spec.excision, 0.5 * r_max) : 0.0);
  if (spec.r_min > 0.0)
    features.push_back({lo, std::min(spec.center_scale, r_max - lo), false, 0.0});
  else if (singular)
    features.push_back({lo, std::min(spec.center_scale, r_max), true, lo});
  else
    features.push_back({0.0, std::min(spec.center_scale, r_max), false, 0.0});
  if (rho > lo && rho < r_max) features.push_back({rho, spec.sigma, false, 0.0});
  if (rho <= lo) features.front().width = std::min(features.front().width, spec.sigma);
  for (double b : spec.breakpoints)
    if (b > lo && b < r_max) features.push_back({b, spec.h_max, false, 0.0});
  const auto edges = panel_edges(lo, r_max, features, spec.h_max);
  auto radial = [&](double r) {
    return sphere_area(model, r) * detail::angular_average(model, r, rho, spec.sigma, spec.order, f);
  };
  double total = integrate_panels(radial, edges, spec.order);
  if (singular && lo > 0) {
    // r = lo * v^k turns the r^{m-1-beta} behaviour into a smooth integrand in v.
    const double k = 1.0 / std::max(1e-3, model.dim() - spec.singular_exponent);
    auto inner = [&](double v) {
      if (v <= 0) return 0.0;
      const double r = lo * std::pow(v, k);
      return radial(r) * lo * k * std::pow(v, k - 1.0);
    };
    total += gauss_integrate(inner, 0.0, 1.0, 16);
  }
  return total;
}

}  // namespace katokit
