#pragma once

// Kato control pairs, the Kato functional N(t) = sup_x int_0^t int p(s,x,y)|w(y)| dmu(y) ds,
// Kato-class verdicts, the Hoelder bound check and the classical h_m functional.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "axial.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "heat_kernel.hpp"
#include "json.hpp"
#include "numerics.hpp"
#include "potentials.hpp"

namespace katokit {

using nlohmann::json;

inline json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

// ---------------------------------------------------------------------------------------------
// Control pairs

/// q is admissible for the integrability condition: q >= 1 when m = 1, q > m/2 when m >= 2.
inline bool admissible_q(double q, int m) { return m == 1 ? q >= 1.0 : q > 0.5 * m; }

/// sup_y p(t,x,y) <= I(x) Itilde(t) on (0,1], with Itilde(t) = scale * t^{-power} + offset.
struct KatoControlPair {
  std::string name;
  int dim = 0;
  std::function<double(PointRef)> I;
  std::optional<double> I_constant;  // set when I does not depend on x
  double tilde_scale = 1.0;
  double tilde_power = 0.0;
  double tilde_offset = 0.0;
  std::map<double, double> certificates;  // q -> int_0^1 Itilde(s)^{1/q} ds
  json empirical = json::object();        // fitted constants with their sweep ranges

  double I_tilde(double t) const { return tilde_scale * std::pow(t, -tilde_power) + tilde_offset; }
};

/// int_0^T Itilde(s)^{1/q} ds.  The substitution s = T v^k with k = 1/(1 - power/q) removes the
/// endpoint singularity: the integrand becomes k T (scale T^{-power} + offset v^{k power})^{1/q}.
inline double tilde_integral(const KatoControlPair& pair, double q, double T = 1.0) {
  if (!admissible_q(q, pair.dim)) return kInf;
  const double a = pair.tilde_power / q;
  if (a >= 1.0) return kInf;
  const double k = 1.0 / (1.0 - a);
  const double sT = pair.tilde_scale * std::pow(T, -pair.tilde_power);
  auto g = [&](double v) { return k * T * std::pow(sT + pair.tilde_offset * std::pow(v, k * pair.tilde_power), 1.0 / q); };
  if (pair.tilde_offset == 0.0) return g(0.5);
  return integrate_adaptive(g, 0.0, 1.0, 1e-300, 1e-14).value;
}

inline void add_certificates(KatoControlPair& pair, const std::vector<double>& qs) {
  for (double q : qs) pair.certificates[q] = tilde_integral(pair, q);
}

inline std::vector<double> default_certificate_qs(int m) {
  if (m == 1) return {1.0, 1.5, 2.0, 4.0};
  return {0.5 * m + 0.1, 0.5 * m + 0.5, 2.0 + 0.5 * m, 5.0};
}

inline json to_json(const KatoControlPair& p) {
  json certs = json::array();
  for (const auto& [q, v] : p.certificates) certs.push_back({{"q", q}, {"integral", json_number(v)}});
  json j = {{"name", p.name},
            {"I_tilde", {{"scale", p.tilde_scale}, {"power", -p.tilde_power}, {"offset", p.tilde_offset}}},
            {"certificates", certs},
            {"empirical_constants", p.empirical}};
  if (p.I_constant) j["I_constant"] = *p.I_constant;
  return j;
}

/// Largest kernel value over points at distances d in [0, 8 sqrt(t)] from x along the frame
/// directions (one direction suffices on isotropic models).  Includes truncation bounds.
inline double sup_kernel_estimate(const HeatKernelEngine& engine, double t, PointRef x) {
  const Manifold& model = engine.model();
  const Eigen::MatrixXd F = tangent_frame(model, x);
  const int dirs = model.isotropic() ? 1 : static_cast<int>(F.cols());
  const double reach = std::min(8.0 * std::sqrt(t), 0.999 * std::min(model.injectivity_radius(), max_radius(model)));
  double best = 0.0;
  for (int j = 0; j < dirs; ++j)
    for (int k = 0; k <= 48; ++k) {
      const double d = reach * k / 48.0;
      const Point y = detail::exp_map_unchecked(model, x, d * F.col(j));
      const auto v = engine.eval_unchecked(t, x, y);
      best = std::max(best, v.value + v.truncation_bound);
    }
  return best;
}

struct PairVerification {
  double margin_min = kInf;  // min of (I Itilde - sup_y p) / (I Itilde)
  double tolerance = 1e-12;
  double worst_t = 0.0;
  Point worst_x;
  std::size_t samples = 0;
  bool pass = true;
};

inline json to_json(const PairVerification& v) {
  return {{"margin_min", json_number(v.margin_min)}, {"tolerance", v.tolerance}, {"worst_t", v.worst_t},
          {"samples", v.samples}, {"verdict", v.pass ? "PASS" : "FAIL"}};
}

/// Checks sup_y p(t,x,y) <= I(x) Itilde(t) on a (t, x) sweep; margins are relative.
inline PairVerification verify_control_pair(const HeatKernelEngine& engine, const KatoControlPair& pair,
                                            const std::vector<double>& ts, const std::vector<Point>& xs,
                                            double tolerance = 1e-12) {
  PairVerification out;
  out.tolerance = tolerance;
  for (const auto& x : xs)
    for (double t : ts) {
      const double bound = pair.I(x) * pair.I_tilde(t);
      const double sup = sup_kernel_estimate(engine, t, x);
      const double margin = (bound - sup) / bound;
      ++out.samples;
      if (margin < out.margin_min) {
        out.margin_min = margin;
        out.worst_t = t;
        out.worst_x = x;
      }
    }
  out.pass = out.margin_min >= -tolerance;
  return out;
}

/// Sample starting points: the origin plus two deterministic pseudo-random points.
inline std::vector<Point> sample_points(const Manifold& model, int count = 3, std::uint64_t seed = 17) {
  std::vector<Point> xs{origin(model)};
  std::mt19937_64 rng(seed);
  for (int i = 1; i < count; ++i) xs.push_back(exp_map(model, xs.front(), gaussian_tangent(model, xs.front(), 0.5, rng)));
  return xs;
}

/// (I, Itilde) = (C, t^{-m/2}) with C = sup_{t in (0,1]} t^{m/2} p(t,x,x) from the on-diagonal sweep.
inline KatoControlPair control_pair_from_on_diag(const HeatKernelEngine& engine) {
  const auto fit = on_diag_upper(engine);
  KatoControlPair p;
  p.name = "on-diagonal";
  p.dim = engine.model().dim();
  const double C = fit.constant;
  p.I = [C](PointRef) { return C; };
  p.I_constant = C;
  p.tilde_power = 0.5 * p.dim;
  p.empirical = {{"C", C},
                 {"t_at_sup", fit.t_at_sup},
                 {"sweep", {{"t_min", fit.t_values.empty() ? 0.0 : fit.t_values.back()}, {"t_max", 1.0}, {"points", fit.t_values.size()}}}};
  add_certificates(p, default_certificate_qs(p.dim));
  return p;
}

/// (I, Itilde) = (C5 / mu(B(x,1)), t^{-m/2}) with C5 the smallest constant making the bound hold
/// on the fitting sweep (dyadic t down to 2^-20 together with the supplied t values).
inline KatoControlPair control_pair_li_yau(const HeatKernelEngine& engine, const std::vector<double>& ts,
                                           const std::vector<Point>& xs) {
  const Manifold& model = engine.model();
  if (!model.geodesically_complete()) throw DomainError("Li-Yau pair needs a complete model");
  const int m = model.dim();
  std::vector<double> fit_t = ts;
  for (int k = 0; k <= 20; ++k) fit_t.push_back(std::ldexp(1.0, -k));
  double C5 = 0.0;
  for (const auto& x : xs) {
    const double vol = ball_volume(model, x, 1.0);
    for (double t : fit_t) {
      try {
        C5 = std::max(C5, sup_kernel_estimate(engine, t, x) * vol * std::pow(t, 0.5 * m));
      } catch (const TruncationError&) {
      }
    }
  }
  KatoControlPair p;
  p.name = "li-yau";
  p.dim = m;
  const Manifold mc = model;
  p.I = [C5, mc](PointRef x) { return C5 / ball_volume(mc, x, 1.0); };
  if (model.isotropic()) p.I_constant = C5 / ball_volume(model, origin(model), 1.0);
  p.tilde_power = 0.5 * m;
  p.empirical = {{"C5", C5},
                 {"kappa", std::max(0.0, -model.ricci_lower_bound())},
                 {"sweep", {{"t_min", *std::min_element(fit_t.begin(), fit_t.end())}, {"t_max", 1.0},
                            {"points", fit_t.size()}, {"x_points", xs.size()}}}};
  add_certificates(p, default_certificate_qs(m));
  return p;
}

struct DoublingReport {
  double margin_min = kInf;  // min log(rhs / lhs)
  std::size_t pairs = 0;
  bool pass = true;
};

/// mu(B(x,s)) <= mu(B(x,s')) (s/s')^m e^{sqrt((m-1) kappa) s} for s' <= s.
inline DoublingReport volume_doubling_check(const Manifold& model, PointRef x, const std::vector<double>& radii) {
  DoublingReport r;
  const int m = model.dim();
  const double kappa = std::max(0.0, -model.ricci_lower_bound());
  for (double s : radii)
    for (double sp : radii) {
      if (sp > s) continue;
      const double lhs = ball_volume(model, x, s);
      const double rhs = ball_volume(model, x, sp) * std::pow(s / sp, m) * std::exp(std::sqrt((m - 1) * kappa) * s);
      r.margin_min = std::min(r.margin_min, std::log(rhs / lhs));
      ++r.pairs;
    }
  r.pass = r.margin_min >= -1e-10;
  return r;
}

// ---------------------------------------------------------------------------------------------
// The inner integral int p(s,x,y)|w(y)| dmu(y)

struct KatoOptions {
  double s_min = 1e-6;      // raised to 1e-4 on the sphere, where the series gets long
  int s_order = 6;          // Gauss-Legendre nodes per dyadic s panel
  double grid_h = 0.05;     // resolution for the grid route
  double window_reach = 7;  // grid window half-width in units of sqrt(t)
};

class KatoIntegrator {
 public:
  KatoIntegrator(HeatKernelEngine engine, Potential w, KatoOptions opt = {})
      : engine_(std::move(engine)), w_(std::move(w)), opt_(opt) {
    const Manifold& model = engine_.model();
    if (model.kind() == ModelKind::Sphere2) opt_.s_min = std::max(opt_.s_min, 1e-4);
    form_ = w_.radial_form(model);
    zero_ = w_.is_zero();
    sup_ = w_.sup_abs(model);
    if (!zero_ && !form_ && !std::isfinite(sup_))
      throw UnsupportedModel("singular potentials need a radial form on an isotropic model");
  }

  const HeatKernelEngine& engine() const { return engine_; }
  const Manifold& model() const { return engine_.model(); }
  const Potential& potential() const { return w_; }
  const std::optional<RadialForm>& radial_form() const { return form_; }
  const KatoOptions& options() const { return opt_; }
  std::string route() const { return form_ ? "radial" : "grid"; }

  /// int p(s,x,y)|w(y)| dmu(y).
  double inner(double s, PointRef x) const {
    if (zero_) return 0.0;
    return form_ ? inner_radial(s, x) : inner_grid(s, x);
  }

  /// Default x-grid: points at a few distances from the potential's center (the functional
  /// depends on x only through that distance on isotropic models), else sample points.
  std::vector<Point> default_x_grid() const {
    const Manifold& model = this->model();
    if (form_ && form_->has_center) {
      std::vector<Point> xs;
      for (double f : {0.0, 0.5, 1.0, 2.0}) {
        const double rho = std::min(f * form_->scale, 0.9 * max_radius(model));
        xs.push_back(point_at_distance(model, form_->center, rho));
      }
      return xs;
    }
    return sample_points(model, 3);
  }

  struct Remainder {
    double bound = kInf;      // rigorous (given the control pair) bound on int_0^{s_min}
    double estimate = kInf;   // power-law extrapolation
    double alpha = 0.0;       // fitted inner(s) ~ A s^{-alpha}
    double q = 0.0;           // Hoelder exponent used for the bound
  };

  /// Bound on int_0^{s_min} inner(s, x) ds: sup|w| s_min for bounded w, else Hoelder with the
  /// on-diagonal pair on the near part plus sup|w| s_min on the far part.
  double remainder_bound(double s_min) const {
    if (zero_) return 0.0;
    if (std::isfinite(sup_)) return sup_ * s_min;
    const Manifold& model = this->model();
    const int m = model.dim();
    const double beta = form_->singular_exponent;
    const double rho0 = std::min({1.0, form_->support, 0.5 * max_radius(model)});
    double far = 0.0;
    const double r_hi = std::min({form_->support, max_radius(model), 1e4});
    for (double r : log_spaced(rho0, std::max(rho0 * 1.0000001, r_hi), 400)) far = std::max(far, std::abs(form_->profile(r)));
    const double C = pair_constant();
    Potential near = Potential::constant(0.0);
    double best = kInf;
    for (double q : {0.5 * m + 0.05, 0.5 * m + 0.25, 0.5 * m + 0.5, 0.75 * m, m - 0.25}) {
      if (!admissible_q(q, m) || beta * q >= m) continue;
      RadialForm nf = *form_;
      nf.support = rho0;
      const double lq = std::pow(C * detail::radial_lq_integral(model, nf, q, rho0, 1e-8 * std::min(1.0, nf.scale)), 1.0 / q);
      const double a = 0.5 * m / q;
      const double b = lq * std::pow(s_min, 1.0 - a) / (1.0 - a) + far * s_min;
      if (b < best) {
        best = b;
        last_q_ = q;
      }
    }
    return best;
  }

  double pair_constant() const {
    if (pair_constant_ < 0) pair_constant_ = on_diag_upper(engine_).constant;
    return pair_constant_;
  }

 private:
  double inner_radial(double s, PointRef x) const {
    const Manifold& model = this->model();
    const RadialForm& f = *form_;
    // A constant has no center of its own; centering at x reduces the integral to one dimension.
    const double rho = f.has_center ? detail::distance_unchecked(model, f.center, x) : 0.0;
    const double reach = 12.0 * std::sqrt(s) + (model.kind() == ModelKind::Hyperbolic3 ? 2.0 * s : 0.0);
    AxialSpec spec;
    spec.sigma = std::sqrt(s);
    spec.r_max = std::min(f.support, rho + reach);
    spec.r_min = std::max(0.0, rho - reach);
    spec.center_scale = std::min(f.scale, std::max(spec.sigma, 1e-3 * f.scale));
    spec.center_singular = f.singular_exponent > 0;
    spec.singular_exponent = f.singular_exponent;
    spec.excision = 1e-9 * std::min(1.0, f.scale);
    spec.breakpoints = f.breakpoints;
    spec.h_max = std::min(0.5, std::max(2.0 * spec.sigma, 0.05));
    const auto& eng = engine_;
    auto integrand = [&](double r_c, double d_x) {
      const double v = std::abs(f.profile(r_c));
      if (v == 0.0) return 0.0;
      return v * eng.eval_distance(s, d_x).value;
    };
    return axial_integrate(model, rho, integrand, spec);
  }

  double inner_grid(double s, PointRef x) const {
    const Manifold& model = this->model();
    Window win = Window::full();
    if (!model.compact()) {
      if (model.kind() != ModelKind::Euclidean) throw UnsupportedModel("grid route on non-compact models needs Euclidean boxes");
      const double hw = opt_.window_reach * std::sqrt(s);
      win = Window::box(x.array() - hw, x.array() + hw);
    }
    const double h = std::min(opt_.grid_h, 0.25 * std::sqrt(s));
    const auto grid = build_grid(model, h, win);
    double total = grid.integrate([&](PointRef y) {
      const double v = std::abs(w_.evaluate(model, y));
      return v == 0.0 ? 0.0 : v * engine_.eval_unchecked(s, x, y).value;
    });
    if (!model.compact()) total += kernel_tail_mass(engine_, s, x, win) * sup_;
    return total;
  }

  HeatKernelEngine engine_;
  Potential w_;
  KatoOptions opt_;
  std::optional<RadialForm> form_;
  bool zero_ = false;
  double sup_ = kInf;
  mutable double pair_constant_ = -1.0;
  mutable double last_q_ = 0.0;
};

// ---------------------------------------------------------------------------------------------
// Kato functional

struct KatoPoint {
  double t = 0.0;
  double value = 0.0;        // quadrature over [s_min, t] plus the extrapolated remainder
  double upper = 0.0;        // quadrature plus the remainder bound
  double quadrature = 0.0;
  double remainder_bound = 0.0;
  double remainder_estimate = 0.0;
  double alpha = 0.0;
  std::size_t argmax_x = 0;
};

struct KatoFunctionalCurve {
  std::vector<double> t_values;  // decreasing
  std::vector<KatoPoint> points;
  double s_min = 0.0;
  std::string route;
  std::size_t x_points = 0;
  PowerLawFit fit;
  bool pass = false;
  std::string verdict;  // "PASS (numerical evidence)" or "FAIL (numerical evidence)"
  std::string reason;
};

inline json to_json(const KatoFunctionalCurve& c) {
  json pts = json::array();
  for (const auto& p : c.points)
    pts.push_back({{"t", p.t}, {"N", json_number(p.value)}, {"upper", json_number(p.upper)},
                   {"remainder_bound", json_number(p.remainder_bound)}, {"alpha", p.alpha}});
  return {{"points", pts},
          {"s_min", c.s_min},
          {"route", c.route},
          {"x_points", c.x_points},
          {"gamma", json_number(c.fit.exponent)},
          {"coefficient", json_number(c.fit.coefficient)},
          {"verdict", c.verdict},
          {"reason", c.reason}};
}

namespace detail {

// Panels [t 2^{-j-1}, t 2^{-j}] down to s_min, with their quadrature contributions cached by
// their endpoints so dyadic t sequences share work.
class DyadicPanels {
 public:
  DyadicPanels(const KatoIntegrator& integ, PointRef x) : integ_(integ), x_(x) {}

  double panel(double a, double b) {
    const auto key = std::make_pair(a, b);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const int order = integ_.options().s_order;
    const GaussRule& rule = gauss_legendre(order);
    const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
    double sum = 0.0;
    for (int k = 0; k < order; ++k) {
      const double s = mid + half * rule.nodes[k];
      const double v = integ_.inner(s, x_);
      samples_.emplace_back(s, v);
      sum += rule.weights[k] * v;
    }
    return cache_[key] = sum * half;
  }

  // Quadrature over [s_min, t].
  double integral(double t, double s_min) {
    double total = 0.0;
    double hi = t;
    while (hi > s_min * (1.0 + 1e-12)) {
      const double lo = std::max(0.5 * hi, s_min);
      total += panel(lo, hi);
      hi = lo;
    }
    return total;
  }

  // inner(s) ~ A s^{-alpha} fitted on the samples in [s_min, 8 s_min].
  PowerLawFit small_s_fit(double s_min) const {
    std::vector<double> xs, ys;
    for (const auto& [s, v] : samples_)
      if (s <= 8.0 * s_min && v > 0) {
        xs.push_back(s);
        ys.push_back(v);
      }
    return fit_power_law(xs, ys);
  }

 private:
  const KatoIntegrator& integ_;
  Point x_;
  std::map<std::pair<double, double>, double> cache_;
  std::vector<std::pair<double, double>> samples_;
};

}  // namespace detail

/// N(t) for each t (decreasing order not required) as the max over the x-grid.
inline KatoFunctionalCurve kato_curve(const KatoIntegrator& integ, const std::vector<double>& ts,
                                      std::vector<Point> xs = {}) {
  if (xs.empty()) xs = integ.default_x_grid();
  for (double t : ts)
    if (!(t > 0)) throw DomainError("kato functional needs t > 0");
  KatoFunctionalCurve curve;
  curve.t_values = ts;
  curve.s_min = integ.options().s_min;
  curve.route = integ.route();
  curve.x_points = xs.size();
  curve.points.resize(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) curve.points[k].t = ts[k];
  for (std::size_t ix = 0; ix < xs.size(); ++ix) {
    detail::DyadicPanels panels(integ, xs[ix]);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const double t = ts[k];
      const double s_min = std::min(curve.s_min, 0.5 * t);
      KatoPoint p;
      p.t = t;
      p.quadrature = panels.integral(t, s_min);
      p.remainder_bound = integ.remainder_bound(s_min);
      const auto fit = panels.small_s_fit(s_min);
      p.alpha = fit.points >= 2 ? -fit.exponent : 0.0;
      if (p.quadrature == 0.0) {
        p.remainder_estimate = 0.0;
      } else if (p.alpha < 0.95) {
        p.remainder_estimate = fit.coefficient * std::pow(s_min, 1.0 - p.alpha) / (1.0 - p.alpha);
      } else {
        p.remainder_estimate = kInf;  // inner(s) decays no faster than 1/s: the s-integral diverges
      }
      p.value = p.quadrature + p.remainder_estimate;
      p.upper = p.quadrature + p.remainder_bound;
      p.argmax_x = ix;
      auto& best = curve.points[k];
      if (ix == 0 || p.value > best.value) best = p;
    }
  }
  return curve;
}

inline double kato_functional(const KatoIntegrator& integ, double t, std::vector<Point> xs = {}) {
  return kato_curve(integ, {t}, std::move(xs)).points.front().value;
}

/// Kato-class verdict on t = t_max 2^{-k}: PASS iff every N(t) has a finite upper bound,
/// N(t_min) <= threshold * N(t_max) and the power-law fit N ~ c t^gamma has gamma > 0.1.
inline KatoFunctionalCurve is_kato(const KatoIntegrator& integ, const std::vector<double>& ts, std::vector<Point> xs = {},
                                   double threshold = 0.5) {
  auto curve = kato_curve(integ, ts, std::move(xs));
  std::vector<double> tv, nv;
  bool finite = true;
  for (const auto& p : curve.points) {
    finite = finite && std::isfinite(p.upper) && std::isfinite(p.value);
    if (p.value > 0 && std::isfinite(p.value)) {
      tv.push_back(p.t);
      nv.push_back(p.value);
    }
  }
  curve.fit = fit_power_law(tv, nv);
  const auto hi = std::max_element(curve.points.begin(), curve.points.end(), [](auto& a, auto& b) { return a.t < b.t; });
  const auto lo = std::min_element(curve.points.begin(), curve.points.end(), [](auto& a, auto& b) { return a.t < b.t; });
  if (!finite) {
    curve.pass = false;
    curve.reason = "N(t) has no finite bound: the short-time integral diverges";
  } else if (hi->value == 0.0) {
    curve.pass = true;
    curve.fit.exponent = kInf;
    curve.reason = "w vanishes";
  } else if (!(lo->value <= threshold * hi->value)) {
    curve.pass = false;
    curve.reason = "N(t) does not decrease below the threshold";
  } else if (!(curve.fit.exponent > 0.1)) {
    curve.pass = false;
    curve.reason = "fitted exponent gamma <= 0.1";
  } else {
    curve.pass = true;
    curve.reason = "N(t) -> 0 with fitted exponent gamma > 0.1";
  }
  curve.verdict = std::string(curve.pass ? "PASS" : "FAIL") + " (numerical evidence)";
  return curve;
}

inline std::vector<double> dyadic_times(double t_max, int count) {
  std::vector<double> ts;
  for (int k = 0; k < count; ++k) ts.push_back(std::ldexp(t_max, -k));
  return ts;
}

// ---------------------------------------------------------------------------------------------
// Hoelder bound  int p(s,x,y)|w| <= Itilde(s)^{1/q} (int |w|^q I)^{1/q}

/// (int |w|^q I dmu)^{1/q} over the whole model.
inline WeightedLqNorm weighted_norm(const Potential& w, double q, const KatoControlPair& pair, const Manifold& model,
                                    double grid_h = 0.05) {
  if (pair.I_constant && w.radial_form(model)) return lq_norm_radial(w, q, *pair.I_constant, model);
  if (w.is_zero()) return lq_norm_radial(w, q, 1.0, model);
  if (!model.compact()) throw UnsupportedModel("weighted norms of non-radial potentials need a compact model");
  const auto grid = build_grid(model, grid_h);
  return lq_norm(w, q, pair.I, model, grid);
}

struct HolderRow {
  double s = 0.0;
  std::size_t x_index = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
};

struct HolderReport {
  double q = 0.0;
  double norm = 0.0;
  std::vector<HolderRow> rows;
  double margin_min = kInf;
  double tolerance = 0.0;
  bool pass = true;
};

inline json to_json(const HolderReport& r) {
  return {{"q", r.q}, {"norm", json_number(r.norm)}, {"margin_min", json_number(r.margin_min)},
          {"tolerance", r.tolerance}, {"samples", r.rows.size()}, {"verdict", r.pass ? "PASS" : "FAIL"}};
}

inline HolderReport holder_bound_check(const KatoIntegrator& integ, const KatoControlPair& pair, double q,
                                       const std::vector<double>& ss, std::vector<Point> xs = {}, double rel_tol = 1e-6) {
  if (!admissible_q(q, pair.dim)) throw DomainError("q is not admissible for this dimension");
  if (xs.empty()) xs = integ.default_x_grid();
  HolderReport rep;
  rep.q = q;
  const auto norm = weighted_norm(integ.potential(), q, pair, integ.model());
  rep.norm = norm.diverges ? kInf : norm.value;
  double worst_tol = 0.0;
  for (double s : ss) {
    if (!(s > 0 && s <= 1)) throw DomainError("holder check needs s in (0,1]");
    for (std::size_t i = 0; i < xs.size(); ++i) {
      HolderRow row;
      row.s = s;
      row.x_index = i;
      row.lhs = integ.inner(s, xs[i]);
      row.rhs = rep.norm == 0.0 ? 0.0 : std::pow(pair.I_tilde(s), 1.0 / q) * rep.norm;
      row.margin = row.rhs - row.lhs;
      const double tol = rel_tol * std::max(row.lhs, std::isfinite(row.rhs) ? row.rhs : 0.0) + 1e-14;
      if (row.margin < rep.margin_min) {
        rep.margin_min = row.margin;
        worst_tol = tol;
      }
      rep.pass = rep.pass && row.margin >= -tol;
      rep.rows.push_back(row);
    }
  }
  rep.tolerance = worst_tol;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Classical characterization on Euclidean space: sup_x int_{|x-y|<=r} |w(y)| h_m(|x-y|) dy with
// h_2 = log+(1/r), h_m = r^{2-m}.

inline double h_m(int m, double r) {
  if (m == 2) return r < 1.0 ? std::log(1.0 / r) : 0.0;
  return std::pow(r, 2.0 - m);
}

struct ClassicalKatoPoint {
  double radius = 0.0;
  double value = 0.0;
  bool diverges = false;
};

inline double classical_kato_functional(const Manifold& model, const Potential& w, double r, const std::vector<Point>& xs) {
  if (model.kind() != ModelKind::Euclidean) throw UnsupportedModel("classical Kato functional is defined on Euclidean space");
  const int m = model.dim();
  if (m == 1) throw UnsupportedModel("m = 1 uses the uniformly local L^1 criterion");
  if (w.is_zero()) return 0.0;
  const auto form = w.radial_form(model);
  if (!form) throw UnsupportedModel("classical Kato functional needs a radial potential");
  const double beta = form->singular_exponent;
  if (beta >= 2.0) return kInf;  // |w| h_m ~ r^{-beta-m+2} is not integrable at the center
  double best = 0.0;
  for (const auto& x : xs) {
    const double rho = detail::distance_unchecked(model, form->center, x);
    double v;
    if (rho == 0.0) {
      RadialForm g = *form;
      auto prof = form->profile;
      g.profile = [prof, m](double s) { return std::abs(prof(s)) * h_m(m, s); };
      g.singular_exponent = beta + (m == 2 ? 0.01 : m - 2.0);
      v = detail::radial_lq_integral(model, g, 1.0, r, 1e-9 * std::min(1.0, r));
    } else {
      // Geodesic polar coordinates around x: h_m is the radial weight, |w| seen at distance d from c.
      AxialSpec spec;
      spec.r_max = r;
      spec.sigma = std::max(1e-3, std::min(0.25 * rho, 0.25 * r));
      spec.center_scale = std::min(r, rho);
      spec.center_singular = true;
      spec.singular_exponent = m == 2 ? 0.01 : m - 2.0;
      spec.h_max = std::min(0.5, 0.25 * r);
      spec.order = 12;
      const auto prof = form->profile;
      v = axial_integrate(model, rho, [&](double rx, double dc) { return h_m(m, rx) * std::abs(prof(dc)); }, spec);
    }
    best = std::max(best, v);
  }
  return best;
}

/// sup_x int_{|x-y|<=1} |w| on Euclidean(1): the m = 1 Kato criterion.
inline double uniform_local_l1(const Potential& w, const std::vector<Point>& xs) {
  const auto model = Manifold::euclidean(1);
  double best = 0.0;
  for (const auto& x : xs) {
    auto f = [&](double y) {
      Eigen::VectorXd p(1);
      p[0] = y;
      return std::abs(w.evaluate(model, p));
    };
    const auto form = w.radial_form(model);
    double v = 0.0;
    if (form && form->has_center && form->singular_exponent >= 1.0 && std::abs(form->center[0] - x[0]) < 1.0) return kInf;
    std::vector<PanelFeature> feats;
    if (form && form->has_center) feats.push_back({form->center[0], 0.01, form->singular_exponent > 0, 1e-12});
    const double lo = x[0] - 1.0, hi = x[0] + 1.0;
    std::vector<PanelFeature> inside;
    for (auto ft : feats)
      if (ft.at > lo && ft.at < hi) inside.push_back(ft);
    v = integrate_panels(f, panel_edges(lo, hi, inside, 0.1), 16);
    best = std::max(best, v);
  }
  return best;
}

struct ClassicalKatoVerdict {
  std::vector<ClassicalKatoPoint> points;
  PowerLawFit fit;
  bool pass = false;
};

inline ClassicalKatoVerdict classical_is_kato(const Manifold& model, const Potential& w, const std::vector<double>& radii,
                                              const std::vector<Point>& xs, double threshold = 0.5) {
  ClassicalKatoVerdict v;
  std::vector<double> rs, vs;
  bool finite = true;
  for (double r : radii) {
    const double val = classical_kato_functional(model, w, r, xs);
    v.points.push_back({r, val, !std::isfinite(val)});
    finite = finite && std::isfinite(val);
    if (val > 0 && std::isfinite(val)) {
      rs.push_back(r);
      vs.push_back(val);
    }
  }
  v.fit = fit_power_law(rs, vs);
  if (!finite) return v;
  if (vs.empty()) {
    v.pass = true;
    return v;
  }
  const double first = v.points.front().value, last = v.points.back().value;
  v.pass = last <= threshold * first && v.fit.exponent > 0.1;
  return v;
}

}  // namespace katokit
