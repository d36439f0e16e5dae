#pragma once

// Minimal heat kernel of (1/2) Delta on the model manifolds.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "axial.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "numerics.hpp"

namespace katokit {

enum class KernelMethodKind { Auto, ClosedForm, SpectralSeries, ImageSum, ProductRule };

struct KernelMethod {
  KernelMethodKind kind = KernelMethodKind::Auto;
  int max_index = 0;  // l_max for series, lattice radius K for image sums; 0 picks automatically

  static KernelMethod parse(const std::string& text) {
    const auto parts = detail::split_top_level(text, ':');
    KernelMethod m;
    if (parts[0] == "auto" && parts.size() == 1) return m;
    if (parts[0] == "closed" && parts.size() == 1) {
      m.kind = KernelMethodKind::ClosedForm;
      return m;
    }
    if ((parts[0] == "series" || parts[0] == "imagesum") && parts.size() <= 2) {
      m.kind = parts[0] == "series" ? KernelMethodKind::SpectralSeries : KernelMethodKind::ImageSum;
      if (parts.size() == 2) {
        m.max_index = detail::parse_int(parts[1]);
        if (m.max_index < 1) throw DomainError("kernel method index must be positive");
      }
      return m;
    }
    throw DomainError("unknown kernel method '" + text + "'");
  }

  std::string str() const {
    switch (kind) {
      case KernelMethodKind::Auto:
        return "auto";
      case KernelMethodKind::ClosedForm:
        return "closed";
      case KernelMethodKind::SpectralSeries:
        return max_index ? "series:" + std::to_string(max_index) : "series";
      case KernelMethodKind::ImageSum:
        return max_index ? "imagesum:" + std::to_string(max_index) : "imagesum";
      case KernelMethodKind::ProductRule:
        return "product";
    }
    return "auto";
  }
};

struct KernelValue {
  double value = 0.0;
  double truncation_bound = 0.0;  // bound on |value - p| from series/lattice truncation
};

class HeatKernelEngine {
 public:
  static constexpr double kDefaultTolerance = 1e-12;
  static constexpr int kSphereIndexCap = 20000;

  explicit HeatKernelEngine(Manifold model, KernelMethod method = {}, double tolerance = kDefaultTolerance)
      : model_(std::move(model)), requested_(method), tolerance_(tolerance) {
    method_ = resolve(model_, method);
    if (model_.kind() == ModelKind::Product) {
      for (const auto& f : model_.factors()) {
        KernelMethod fm = method;
        try {
          resolve(f, fm);
        } catch (const UnsupportedModel&) {
          fm = {};
        }
        factors_.emplace_back(f, fm, tolerance);
      }
    }
  }

  const Manifold& model() const { return model_; }
  KernelMethod method() const { return method_; }
  double tolerance() const { return tolerance_; }
  const std::vector<HeatKernelEngine>& factor_engines() const { return factors_; }

  double eval(double t, PointRef x, PointRef y) const { return eval_with_bound(t, x, y).value; }

  KernelValue eval_with_bound(double t, PointRef x, PointRef y) const {
    check_time(t);
    validate_point(model_, x);
    validate_point(model_, y);
    return eval_unchecked(t, x, y);
  }

  /// Kernel as a function of the distance (isotropic models).
  KernelValue eval_distance(double t, double d) const {
    check_time(t);
    switch (model_.kind()) {
      case ModelKind::Euclidean:
        return {euclidean(model_.dim(), t, d), 0.0};
      case ModelKind::Hyperbolic3:
        return {hyperbolic(t, d), 0.0};
      case ModelKind::Sphere2:
        return sphere(t, d);
      case ModelKind::Circle:
        return periodic_1d(t, d, 2.0 * kPi);
      default:
        throw UnsupportedModel("eval_distance needs an isotropic model");
    }
  }

  double on_diagonal(double t) const { return eval(t, origin(model_), origin(model_)); }

  /// Analytic truncation bound at (t, x, y) (zero for closed forms).
  double truncation_bound(double t, PointRef x, PointRef y) const { return eval_with_bound(t, x, y).truncation_bound; }

  // Raw evaluation without chart validation.
  KernelValue eval_unchecked(double t, PointRef x, PointRef y) const {
    switch (model_.kind()) {
      case ModelKind::Euclidean:
        return {euclidean(model_.dim(), t, (x - y).norm()), 0.0};
      case ModelKind::Hyperbolic3:
        return {hyperbolic(t, detail::distance_unchecked(model_, x, y)), 0.0};
      case ModelKind::Sphere2:
        return sphere(t, detail::distance_unchecked(model_, x, y));
      case ModelKind::Circle:
        return periodic_1d(t, detail::periodic_delta(x[0], y[0], 2.0 * kPi), 2.0 * kPi);
      case ModelKind::Torus: {
        KernelValue v{1.0, 0.0};
        for (int i = 0; i < model_.dim(); ++i) {
          const KernelValue f = periodic_1d(t, detail::periodic_delta(x[i], y[i], model_.side()), model_.side());
          v = combine(v, f);
        }
        return v;
      }
      case ModelKind::Product: {
        KernelValue v{1.0, 0.0};
        for (std::size_t i = 0; i < factors_.size(); ++i) {
          const int off = model_.factor_offset(i);
          const int n = model_.factors()[i].chart_dim();
          v = combine(v, factors_[i].eval_unchecked(t, x.segment(off, n), y.segment(off, n)));
        }
        return v;
      }
    }
    return {};
  }

 private:
  static KernelMethod resolve(const Manifold& model, KernelMethod m) {
    const auto kind = model.kind();
    const auto unsupported = [&] {
      return UnsupportedModel("kernel method " + m.str() + " is not available on " + model.spec());
    };
    switch (m.kind) {
      case KernelMethodKind::Auto:
        if (kind == ModelKind::Euclidean || kind == ModelKind::Hyperbolic3) m.kind = KernelMethodKind::ClosedForm;
        if (kind == ModelKind::Sphere2) m.kind = KernelMethodKind::SpectralSeries;
        if (kind == ModelKind::Circle || kind == ModelKind::Torus) m.kind = KernelMethodKind::ImageSum;
        if (kind == ModelKind::Product) m.kind = KernelMethodKind::ProductRule;
        return m;
      case KernelMethodKind::ClosedForm:
        if (kind != ModelKind::Euclidean && kind != ModelKind::Hyperbolic3) throw unsupported();
        return m;
      case KernelMethodKind::SpectralSeries:
        if (kind != ModelKind::Sphere2 && kind != ModelKind::Circle && kind != ModelKind::Torus && kind != ModelKind::Product)
          throw unsupported();
        return m;
      case KernelMethodKind::ImageSum:
        if (kind != ModelKind::Circle && kind != ModelKind::Torus && kind != ModelKind::Product) throw unsupported();
        return m;
      case KernelMethodKind::ProductRule:
        if (kind != ModelKind::Product) throw unsupported();
        return m;
    }
    return m;
  }

  static void check_time(double t) {
    if (!(t > 0) || !std::isfinite(t)) throw DomainError("heat kernel time must be positive and finite");
  }

  static KernelValue combine(const KernelValue& a, const KernelValue& b) {
    const double v = a.value * b.value;
    const double bound = (a.value + a.truncation_bound) * (b.value + b.truncation_bound) - v;
    return {v, std::max(0.0, bound)};
  }

  static double euclidean(int m, double t, double d) {
    return std::pow(2.0 * kPi * t, -0.5 * m) * std::exp(-d * d / (2.0 * t));
  }

  static double hyperbolic(double t, double d) {
    double ratio;
    if (d < 1e-4) {
      const double d2 = d * d;
      ratio = 1.0 - d2 / 6.0 + 7.0 * d2 * d2 / 360.0;
    } else {
      ratio = d / std::sinh(d);
    }
    return std::pow(2.0 * kPi * t, -1.5) * ratio * std::exp(-d * d / (2.0 * t) - 0.5 * t);
  }

  // Sum_l (2l+1)/(4 pi) exp(-l(l+1)t/2) P_l(cos d).
  KernelValue sphere(double t, double d) const {
    auto tail = [t](int L) { return std::exp(-0.5 * L * (L + 1.0) * t) / (2.0 * kPi * t); };
    int L = method_.max_index;
    if (L == 0) {
      L = std::max(2, static_cast<int>(std::ceil(1.0 / std::sqrt(t))));
      const double need = 2.0 * std::log(1.0 / (2.0 * kPi * t * tolerance_)) / t;
      if (need > 0) L = std::max(L, static_cast<int>(std::ceil(0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * need)))));
      if (L > kSphereIndexCap)
        throw TruncationError("sphere series needs l_max > cap at t = " + std::to_string(t), tail(kSphereIndexCap));
    }
    const double bound = L >= 1.0 / std::sqrt(t) ? tail(L) : tail_direct(t, L);
    if (bound > tolerance_ && method_.max_index != 0)
      throw TruncationError("sphere series truncated at l_max = " + std::to_string(L) + " misses the tolerance", bound);
    const double x = std::cos(d);
    double p0 = 1.0, p1 = x;
    double sum = 1.0;
    double abs_sum = 1.0;
    if (L >= 1) {
      const double term = 3.0 * std::exp(-t) * x;
      sum += term;
      abs_sum += std::abs(term);
    }
    for (int l = 2; l <= L; ++l) {
      const double p2 = ((2.0 * l - 1.0) * x * p1 - (l - 1.0) * p0) / l;
      p0 = p1;
      p1 = p2;
      const double weight = (2.0 * l + 1.0) * std::exp(-0.5 * l * (l + 1.0) * t);
      if (weight == 0.0) break;
      const double term = weight * p2;
      sum += term;
      abs_sum += std::abs(term);
    }
    double value = sum / (4.0 * kPi);
    const double roundoff = 1e-15 * L * abs_sum / (4.0 * kPi);
    // Nonnegative Ricci curvature: the Euclidean kernel at the same distance is a lower bound.
    value = std::max(value, euclidean(2, t, d));
    return {value, bound + roundoff};
  }

  static double tail_direct(double t, int L) {
    double s = 0.0;
    for (int l = L + 1; l < L + 100000; ++l) {
      const double term = (2.0 * l + 1.0) * std::exp(-0.5 * l * (l + 1.0) * t) / (4.0 * kPi);
      s += term;
      if (term < 1e-18 * s && l > 1.0 / std::sqrt(t)) break;
    }
    return s;
  }

  // Periodic kernel on a circle of length L at minimal-image separation delta.
  KernelValue periodic_1d(double t, double delta, double L) const {
    if (method_.kind == KernelMethodKind::SpectralSeries) {
      // (1/L) sum_k exp(-(2 pi k / L)^2 t / 2) cos(2 pi k delta / L)
      const double w = 2.0 * kPi / L;
      int K = method_.max_index;
      if (K == 0) K = std::max(1, static_cast<int>(std::ceil(std::sqrt(2.0 * 40.0 / t) / w)));
      auto tail = [&](int k) {
        const double a = std::exp(-0.5 * std::pow(w * (k + 1), 2) * t);
        return 2.0 / L * a / (1.0 - std::exp(-w * w * t * (k + 1)));
      };
      const double bound = tail(K);
      if (bound > tolerance_ && method_.max_index != 0)
        throw TruncationError("Fourier series truncated at K = " + std::to_string(K) + " misses the tolerance", bound);
      double s = 1.0;
      for (int k = K; k >= 1; --k) s += 2.0 * std::exp(-0.5 * std::pow(w * k, 2) * t) * std::cos(w * k * delta);
      return {std::max(s / L, 0.0), bound};
    }
    int K = method_.max_index;
    if (K == 0) K = static_cast<int>(std::ceil(std::sqrt(2.0 * 40.0 * t) / L)) + 1;
    // Images beyond |k| > K sit at distance at least (K + 1/2) L.
    const double a = (K + 0.5) * L;
    const double bound = 2.0 / std::sqrt(2.0 * kPi * t) * std::exp(-a * a / (2.0 * t)) / (1.0 - std::exp(-a * L / t));
    if (bound > tolerance_ && method_.max_index != 0)
      throw TruncationError("image sum truncated at K = " + std::to_string(K) + " misses the tolerance", bound);
    double s = 0.0;
    for (int k = K; k >= 1; --k) {
      const double u = delta + k * L;
      const double v = delta - k * L;
      s += std::exp(-u * u / (2.0 * t)) + std::exp(-v * v / (2.0 * t));
    }
    s += std::exp(-delta * delta / (2.0 * t));
    return {s / std::sqrt(2.0 * kPi * t), bound};
  }

  Manifold model_;
  KernelMethod requested_;
  KernelMethod method_;
  double tolerance_;
  std::vector<HeatKernelEngine> factors_;
};

// ---------------------------------------------------------------------------------------------
// Mass outside windows.

/// Mass of p(t, x, .) outside the window (exact for Euclidean boxes, radial quadrature for
/// balls on isotropic models, 0 for the full compact model).
inline double kernel_tail_mass(const HeatKernelEngine& engine, double t, PointRef x, const Window& w) {
  const Manifold& model = engine.model();
  switch (w.kind) {
    case Window::Kind::Full:
      if (!model.compact()) throw DomainError("full window on a non-compact model");
      return 0.0;
    case Window::Kind::Box: {
      if (model.kind() != ModelKind::Euclidean) throw UnsupportedModel("box tail mass is available on Euclidean models");
      double inside = 1.0;
      const double s = std::sqrt(2.0 * t);
      for (int j = 0; j < model.dim(); ++j) inside *= 0.5 * (std::erf((w.hi[j] - x[j]) / s) - std::erf((w.lo[j] - x[j]) / s));
      return std::max(0.0, 1.0 - inside);
    }
    case Window::Kind::Ball: {
      if (!model.isotropic()) throw UnsupportedModel("ball tail mass needs an isotropic model");
      const double R = w.radius - detail::distance_unchecked(model, w.center, x);
      if (R <= 0) return 1.0;
      if (R >= max_radius(model)) return 0.0;
      auto f = [&](double r) {
        const double p = engine.eval_distance(t, r).value;
        return p == 0.0 ? 0.0 : p * sphere_area(model, r);
      };
      if (model.compact()) return integrate_adaptive(f, R, max_radius(model), 1e-15, 1e-10).value;
      return integrate_to_infinity(f, R, 1e-16, 1e-10).value;
    }
    case Window::Kind::Product: {
      double inside = 1.0;
      for (std::size_t i = 0; i < w.parts.size(); ++i) {
        const auto& f = model.factors()[i];
        const int off = model.factor_offset(i);
        inside *= 1.0 - kernel_tail_mass(engine.factor_engines()[i], t, x.segment(off, f.chart_dim()), w.parts[i]);
      }
      return std::max(0.0, 1.0 - inside);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------------------------
// sup_y p(t, x, y) over a grid.

struct SupBound {
  double grid_max = 0.0;
  double diagonal = 0.0;
  bool verified = true;  // grid_max <= diagonal + tolerance
};

inline SupBound sup_bound(const HeatKernelEngine& engine, double t, PointRef x, const QuadratureGrid& grid,
                          double tolerance = 1e-12) {
  SupBound s;
  s.diagonal = engine.eval(t, x, x);
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    s.grid_max = std::max(s.grid_max, engine.eval_unchecked(t, x, grid.nodes.col(i)).value);
  s.verified = s.grid_max <= s.diagonal * (1.0 + tolerance) + tolerance;
  return s;
}

// ---------------------------------------------------------------------------------------------
// Consistency checks: mass, Chapman-Kolmogorov, symmetry.

struct KernelCheckReport {
  double mass_defect = 0.0;
  double ck_residual = 0.0;
  double symmetry_residual = 0.0;
  double truncation_bound = 0.0;
  double tail_bound = 0.0;  // analytic mass outside the quadrature windows
  int samples = 0;
  std::string route;        // "radial" or "grid"
};

inline nlohmann::json to_json(const KernelCheckReport& r) {
  return {{"mass_defect", r.mass_defect},         {"ck_residual", r.ck_residual},
          {"symmetry_residual", r.symmetry_residual}, {"truncation_bound", r.truncation_bound},
          {"tail_bound", r.tail_bound},           {"samples", r.samples},
          {"route", r.route}};
}

namespace detail {

// Default window holding p(t, x, .) up to a negligible tail.
inline Window default_window(const Manifold& model, PointRef x, double t_max) {
  const double reach = 10.0 * std::sqrt(t_max);
  switch (model.kind()) {
    case ModelKind::Euclidean:
      return Window::box(x.array() - reach, x.array() + reach);
    case ModelKind::Hyperbolic3:
      return Window::ball(Point(x), reach + t_max);
    case ModelKind::Product: {
      std::vector<Window> parts;
      for (std::size_t i = 0; i < model.factors().size(); ++i) {
        const auto& f = model.factors()[i];
        parts.push_back(default_window(f, x.segment(model.factor_offset(i), f.chart_dim()), t_max));
      }
      return Window::product(parts);
    }
    default:
      return Window::full();
  }
}

inline double default_resolution(const Manifold& model, double t_min) {
  // Gauss-Legendre cells of order 3 need a few cells per kernel width; periodic grids are
  // spectrally accurate once the spacing resolves the narrowest kernel.
  const double h = 0.25 * std::sqrt(t_min);
  if (model.compact() && model.kind() != ModelKind::Sphere2) return std::min(h, 0.05);
  return h;
}

}  // namespace detail

/// Mass, Chapman-Kolmogorov and symmetry residuals on the sampled (t, x, y).  Isotropic models
/// use the reduced radial quadrature; others (and explicit grids) use grid quadrature plus the
/// analytic tail mass outside the window.
inline KernelCheckReport check_consistency(const HeatKernelEngine& engine, const std::vector<double>& t_samples,
                                           const std::vector<Point>& points, const QuadratureGrid* grid = nullptr) {
  if (t_samples.empty() || points.empty()) throw DomainError("check_consistency needs samples");
  const Manifold& model = engine.model();
  KernelCheckReport rep;
  const bool radial = grid == nullptr && model.isotropic();
  rep.route = radial ? "radial" : "grid";
  const double t_min = *std::min_element(t_samples.begin(), t_samples.end());
  const double t_max = *std::max_element(t_samples.begin(), t_samples.end());

  for (double t : t_samples)
    for (const auto& x : points)
      for (const auto& y : points) {
        const KernelValue a = engine.eval_with_bound(t, x, y);
        const KernelValue b = engine.eval_with_bound(t, y, x);
        rep.symmetry_residual = std::max(rep.symmetry_residual, std::abs(a.value - b.value));
        rep.truncation_bound = std::max({rep.truncation_bound, a.truncation_bound, b.truncation_bound});
      }

  auto radial_spec = [&](double sig_center, double sig_x, double rho) {
    AxialSpec s;
    s.center_scale = sig_center;
    s.sigma = sig_x;
    s.r_max = model.compact() ? kInf : rho + 12.0 * std::sqrt(2.0 * t_max) + t_max;
    return s;
  };

  for (std::size_t k = 0; k < t_samples.size(); ++k) {
    const double t = t_samples[k];
    const double s = t_samples[(k + 1) % t_samples.size()];
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Point& x = points[i];
      const Point& y = points[(i + 1) % points.size()];
      double mass, tail = 0.0, ck;
      if (radial) {
        const AxialSpec spec = radial_spec(std::sqrt(t), std::sqrt(t), 0.0);
        mass = axial_integrate(model, 0.0, [&](double r, double) { return engine.eval_distance(t, r).value; }, spec);
        if (!model.compact()) tail = kernel_tail_mass(engine, t, x, Window::ball(x, spec.r_max));
        const double rho = distance(model, x, y);
        ck = axial_integrate(
            model, rho,
            [&](double r, double d) { return engine.eval_distance(t, r).value * engine.eval_distance(s, d).value; },
            radial_spec(std::sqrt(t), std::sqrt(s), rho));
      } else {
        QuadratureGrid local;
        const QuadratureGrid* g = grid;
        if (g == nullptr) {
          local = build_grid(model, detail::default_resolution(model, t_min), detail::default_window(model, x, t_max));
          g = &local;
        }
        mass = g->integrate([&](const Eigen::VectorXd& z) { return engine.eval_unchecked(t, x, z).value; });
        if (!model.compact()) tail = kernel_tail_mass(engine, t, x, g->window);
        ck = g->integrate([&](const Eigen::VectorXd& z) {
          return engine.eval_unchecked(t, x, z).value * engine.eval_unchecked(s, z, y).value;
        });
      }
      rep.tail_bound = std::max(rep.tail_bound, tail);
      rep.mass_defect = std::max(rep.mass_defect, std::abs(mass + tail - 1.0));
      rep.ck_residual = std::max(rep.ck_residual, std::abs(ck - engine.eval(t + s, x, y)));
      ++rep.samples;
    }
  }
  return rep;
}

/// Empirical sup over t in {2^-k} (0 <= k <= k_max) of t^{m/2} p(t, x, x).
struct OnDiagonalFit {
  double constant = 0.0;
  double t_at_sup = 0.0;
  std::vector<double> t_values;
  std::vector<double> ratios;
};

inline OnDiagonalFit on_diag_upper(const HeatKernelEngine& engine, int k_max = 20) {
  OnDiagonalFit fit;
  const int m = engine.model().dim();
  for (int k = 0; k <= k_max; ++k) {
    const double t = std::ldexp(1.0, -k);
    double v;
    try {
      v = engine.on_diagonal(t);
    } catch (const TruncationError&) {
      break;
    }
    const double ratio = std::pow(t, 0.5 * m) * v;
    fit.t_values.push_back(t);
    fit.ratios.push_back(ratio);
    if (ratio > fit.constant) {
      fit.constant = ratio;
      fit.t_at_sup = t;
    }
  }
  return fit;
}

}  // namespace katokit
