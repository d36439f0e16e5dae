#pragma once

// Potentials w on the model manifolds: descriptors, evaluation, L^q norms and the Coulomb
// potential V(x, y) = (1/2) int_0^inf p(s, x, y) ds.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "axial.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "heat_kernel.hpp"
#include "numerics.hpp"

namespace katokit {

// ---------------------------------------------------------------------------------------------
// Coulomb potential

struct CoulombValue {
  double value = 0.0;       // (1/2) int_0^{s_max} p ds
  double tail_bound = 0.0;  // bound on (1/2) int_{s_max}^inf p ds
  double quadrature_error = 0.0;
  double s_max = 0.0;
};

namespace detail {

inline void require_coulomb_decay(const Manifold& model) {
  const bool ok = (model.kind() == ModelKind::Euclidean && model.dim() >= 3) || model.kind() == ModelKind::Hyperbolic3;
  if (!ok) throw UnsupportedModel("Coulomb potential needs p(t,x,x) <= C t^{-3/2} for all t; " + model.spec() + " lacks it");
}

// Bound on (1/2) int_{s}^inf sup_y p(u, x, y) du.
inline double coulomb_tail(const Manifold& model, double s) {
  const int m = model.dim();
  if (model.kind() == ModelKind::Hyperbolic3) {
    // p <= (2 pi u)^{-3/2} e^{-u/2} <= (2 pi s)^{-3/2} e^{-u/2}
    return 0.5 * std::pow(2.0 * kPi * s, -1.5) * 2.0 * std::exp(-0.5 * s);
  }
  return 0.5 * std::pow(2.0 * kPi, -0.5 * m) * std::pow(s, 1.0 - 0.5 * m) / (0.5 * m - 1.0);
}

}  // namespace detail

/// V(x, y) = (1/2) int_0^inf p(s, x, y) ds at distance r, by adaptive quadrature in log s up to
/// the time where the analytic tail bound falls below tol * value.
inline CoulombValue coulomb_distance(const HeatKernelEngine& engine, double r, double tol = 1e-10) {
  detail::require_coulomb_decay(engine.model());
  if (!(r > 0)) throw SingularityError("Coulomb potential is singular at x = y");
  const Manifold& model = engine.model();
  auto integrand = [&](double u) {
    const double s = std::exp(u);
    return 0.5 * engine.eval_distance(s, r).value * s;
  };
  // The integrand in u = log s peaks near s = r^2 / m and is negligible far below it.
  const double peak = std::log(r * r / model.dim());
  const double u_lo = peak - 12.0;  // e^{-r^2/2s} < e^{-e^{12}} there
  CoulombValue out;
  double s_max = std::max(4.0, 4.0 * r * r);
  double u_prev = u_lo;
  double value = 0.0, err = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double u_hi = std::log(s_max);
    if (u_hi > u_prev) {
      const auto piece = integrate_adaptive(integrand, u_prev, u_hi, 1e-300, 1e-13, 2000);
      value += piece.value;
      err += piece.error;
      u_prev = u_hi;
    }
    const double tail = detail::coulomb_tail(model, s_max);
    if (tail <= tol * value) {
      out.tail_bound = tail;
      break;
    }
    s_max *= 16.0;
    out.tail_bound = tail;
  }
  out.value = value;
  out.quadrature_error = err;
  out.s_max = s_max;
  return out;
}

inline CoulombValue coulomb(const HeatKernelEngine& engine, PointRef x, PointRef y, double tol = 1e-10) {
  detail::require_coulomb_decay(engine.model());
  const double r = distance(engine.model(), x, y);
  if (r == 0.0) throw SingularityError("Coulomb potential is singular at x = y");
  return coulomb_distance(engine, r, tol);
}

/// r V(r) tabulated on a logarithmic grid with cubic spline interpolation in log r.
class CoulombTable {
 public:
  explicit CoulombTable(const HeatKernelEngine& engine, double r_min = 1e-4, double r_max = 1e3, int points = 401)
      : model_(engine.model()), log_lo_(std::log(r_min)) {
    detail::require_coulomb_decay(model_);
    // On H3 the potential decays like e^{-2r}; beyond r = 30 the log-linear extrapolation is exact enough.
    if (model_.kind() == ModelKind::Hyperbolic3) r_max = std::min(r_max, 30.0);
    log_hi_ = std::log(r_max);
    const int n = points;
    step_ = (log_hi_ - log_lo_) / (n - 1);
    y_.resize(n);
    for (int i = 0; i < n; ++i) {
      const double r = std::exp(log_lo_ + i * step_);
      y_[i] = std::log(r * coulomb_distance(engine, r, 1e-12).value);
    }
    // Natural cubic spline second derivatives.
    m_.assign(n, 0.0);
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (int i = 1; i < n - 1; ++i) {
      const double rhs = 6.0 * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / (step_ * step_);
      const double denom = 4.0 - c[i - 1];
      c[i] = 1.0 / denom;
      d[i] = (rhs - d[i - 1]) / denom;
    }
    for (int i = n - 2; i >= 1; --i) m_[i] = d[i] - c[i] * m_[i + 1];
  }

  const Manifold& model() const { return model_; }

  double operator()(double r) const {
    if (r <= 0) return kInf;
    const double u = std::log(r);
    double log_rv;
    if (u <= log_lo_) {
      log_rv = y_.front();
    } else if (u >= log_hi_) {
      const double r_hi = std::exp(log_hi_);
      if (model_.kind() == ModelKind::Hyperbolic3) return std::exp(y_.back() - 2.0 * (r - r_hi)) / r;
      const double slope = (y_.back() - y_[y_.size() - 2]) / step_;
      log_rv = y_.back() + slope * (u - log_hi_);
    } else {
      const double pos = (u - log_lo_) / step_;
      const int i = std::min(static_cast<int>(pos), static_cast<int>(y_.size()) - 2);
      const double a = pos - i, b = 1.0 - a;
      log_rv = b * y_[i] + a * y_[i + 1] + ((b * b * b - b) * m_[i] + (a * a * a - a) * m_[i + 1]) * step_ * step_ / 6.0;
    }
    return std::exp(log_rv) / r;
  }

 private:
  Manifold model_;
  double log_lo_, log_hi_, step_ = 0.0;
  std::vector<double> y_, m_;
};

// ---------------------------------------------------------------------------------------------
// Potential descriptors

/// Radial description w(y) = profile(d(y, center)) used by the reduced quadratures.
struct RadialForm {
  Point center;
  bool has_center = false;  // false for constants (any center works)
  std::function<double(double)> profile;
  double singular_exponent = 0.0;  // |profile(r)| ~ r^{-beta} as r -> 0
  double support = kInf;           // profile vanishes beyond
  std::vector<double> breakpoints; // jumps or kinks
  double scale = 1.0;              // length scale of structure near the center
};

class Potential {
 public:
  enum class Kind { Constant, RadialPower, IndicatorBall, IndicatorBox, Bump, Cosine, Coulomb, CoulombPair, Pullback, Sum, Scale };

  static Potential constant(double c) {
    Node n;
    n.kind = Kind::Constant;
    n.value = c;
    return Potential(std::move(n));
  }
  /// d(y, center)^{-beta} 1{d < cutoff}.
  static Potential radial_power(Point center, double beta, double cutoff = kInf) {
    if (!(beta > 0)) throw DomainError("radial power exponent must be positive");
    Node n;
    n.kind = Kind::RadialPower;
    n.center = std::move(center);
    n.value = beta;
    n.radius = cutoff;
    return Potential(std::move(n));
  }
  static Potential indicator_ball(Point center, double radius) {
    Node n;
    n.kind = Kind::IndicatorBall;
    n.center = std::move(center);
    n.radius = radius;
    return Potential(std::move(n));
  }
  static Potential indicator_box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    Node n;
    n.kind = Kind::IndicatorBox;
    n.lo = std::move(lo);
    n.hi = std::move(hi);
    return Potential(std::move(n));
  }
  /// height * exp(-d(y, center)^2 / (2 width^2)).
  static Potential gaussian_bump(Point center, double width, double height = 1.0) {
    Node n;
    n.kind = Kind::Bump;
    n.center = std::move(center);
    n.radius = width;
    n.value = height;
    return Potential(std::move(n));
  }
  /// amplitude * cos(k theta) on the circle (first chart coordinate on flat models).
  static Potential cosine(double amplitude = 1.0, int k = 1) {
    Node n;
    n.kind = Kind::Cosine;
    n.value = amplitude;
    n.index = k;
    return Potential(std::move(n));
  }
  static Potential coulomb(Point center, std::shared_ptr<const CoulombTable> table) {
    Node n;
    n.kind = Kind::Coulomb;
    n.center = std::move(center);
    n.table = std::move(table);
    return Potential(std::move(n));
  }
  /// V(x_i, x_j) on a product of copies of the table's model.
  static Potential coulomb_pair(int i, int j, std::shared_ptr<const CoulombTable> table) {
    Node n;
    n.kind = Kind::CoulombPair;
    n.factors = {i, j};
    n.table = std::move(table);
    return Potential(std::move(n));
  }
  /// inner(pi(y)) where pi projects a product onto the listed factors (0-based).
  static Potential pullback(std::vector<int> factors, Potential inner) {
    if (factors.empty()) throw DomainError("pullback needs at least one factor");
    Node n;
    n.kind = Kind::Pullback;
    n.factors = std::move(factors);
    n.children = {std::move(inner)};
    return Potential(std::move(n));
  }
  static Potential sum(std::vector<Potential> terms) {
    Node n;
    n.kind = Kind::Sum;
    n.children = std::move(terms);
    return Potential(std::move(n));
  }
  static Potential scale(double c, Potential inner) {
    Node n;
    n.kind = Kind::Scale;
    n.value = c;
    n.children = {std::move(inner)};
    return Potential(std::move(n));
  }

  Kind kind() const { return node_->kind; }

  /// w(y); +inf at the center of a radial power or Coulomb term.
  double evaluate(const Manifold& model, PointRef y) const { return eval(*node_, model, y, 0.0); }
  double positive_part(const Manifold& model, PointRef y) const { return std::max(0.0, evaluate(model, y)); }
  double negative_part(const Manifold& model, PointRef y) const { return std::max(0.0, -evaluate(model, y)); }

  /// Evaluation with singular terms read at distance max(d, eps) from their centers.
  double evaluate_capped(const Manifold& model, PointRef y, double eps) const { return eval(*node_, model, y, eps); }

  /// Distance from y to the nearest singular point (inf if none).
  double singular_distance(const Manifold& model, PointRef y) const { return sing_dist(*node_, model, y); }

  bool is_zero() const {
    const Node& n = *node_;
    if (n.kind == Kind::Constant || n.kind == Kind::Scale) {
      if (n.value == 0.0) return true;
      return n.kind == Kind::Scale && n.children[0].is_zero();
    }
    if (n.kind == Kind::Sum) {
      for (const auto& c : n.children)
        if (!c.is_zero()) return false;
      return true;
    }
    return false;
  }

  /// Radial description around a single center on isotropic models, if one exists.
  std::optional<RadialForm> radial_form(const Manifold& model) const { return radial(*node_, model); }

  /// sup |w| (inf for singular potentials).
  double sup_abs(const Manifold& model) const { return sup(*node_, model); }

  std::string describe() const { return desc(*node_); }

 private:
  struct Node {
    Kind kind = Kind::Constant;
    double value = 0.0;
    double radius = kInf;
    int index = 0;
    Point center;
    Eigen::VectorXd lo, hi;
    std::vector<int> factors;
    std::vector<Potential> children;
    std::shared_ptr<const CoulombTable> table;
  };

  explicit Potential(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}

  static Manifold sub_model(const Manifold& model, const std::vector<int>& idx) {
    if (model.kind() != ModelKind::Product) throw DimensionMismatch("pullback needs a product model");
    for (int i : idx)
      if (i < 0 || i >= static_cast<int>(model.factors().size())) throw DimensionMismatch("pullback factor index out of range");
    if (idx.size() == 1) return model.factors()[idx[0]];
    std::vector<Manifold> fs;
    for (int i : idx) fs.push_back(model.factors()[i]);
    return Manifold::product(fs);
  }

  static Point project(const Manifold& model, const std::vector<int>& idx, PointRef y) {
    int n = 0;
    for (int i : idx) n += model.factors()[i].chart_dim();
    Point p(n);
    int k = 0;
    for (int i : idx) {
      const int d = model.factors()[i].chart_dim();
      p.segment(k, d) = y.segment(model.factor_offset(i), d);
      k += d;
    }
    return p;
  }

  static double eval(const Node& n, const Manifold& model, PointRef y, double eps) {
    switch (n.kind) {
      case Kind::Constant:
        return n.value;
      case Kind::RadialPower: {
        const double d = std::max(detail::distance_unchecked(model, n.center, y), eps);
        if (d >= n.radius) return 0.0;
        return d == 0.0 ? kInf : std::pow(d, -n.value);
      }
      case Kind::IndicatorBall:
        return detail::distance_unchecked(model, n.center, y) <= n.radius ? 1.0 : 0.0;
      case Kind::IndicatorBox:
        return ((y.array() >= n.lo.array()) && (y.array() <= n.hi.array())).all() ? 1.0 : 0.0;
      case Kind::Bump: {
        const double d = detail::distance_unchecked(model, n.center, y);
        return n.value * std::exp(-d * d / (2.0 * n.radius * n.radius));
      }
      case Kind::Cosine:
        return n.value * std::cos(n.index * y[0]);
      case Kind::Coulomb: {
        const double d = std::max(detail::distance_unchecked(model, n.center, y), eps);
        return d == 0.0 ? kInf : (*n.table)(d);
      }
      case Kind::CoulombPair: {
        const auto& f = model.factors().at(n.factors[0]);
        const int dim = f.chart_dim();
        const double d = std::max(detail::distance_unchecked(f, y.segment(model.factor_offset(n.factors[0]), dim),
                                                             y.segment(model.factor_offset(n.factors[1]), dim)),
                                  eps);
        return d == 0.0 ? kInf : (*n.table)(d);
      }
      case Kind::Pullback:
        return eval(*n.children[0].node_, sub_model(model, n.factors), project(model, n.factors, y), eps);
      case Kind::Sum: {
        double s = 0.0;
        for (const auto& c : n.children) s += eval(*c.node_, model, y, eps);
        return s;
      }
      case Kind::Scale: {
        const double v = eval(*n.children[0].node_, model, y, eps);
        return n.value == 0.0 ? 0.0 : n.value * v;
      }
    }
    return 0.0;
  }

  static double sing_dist(const Node& n, const Manifold& model, PointRef y) {
    switch (n.kind) {
      case Kind::RadialPower:
      case Kind::Coulomb:
        return detail::distance_unchecked(model, n.center, y);
      case Kind::CoulombPair: {
        const auto& f = model.factors().at(n.factors[0]);
        const int dim = f.chart_dim();
        return detail::distance_unchecked(f, y.segment(model.factor_offset(n.factors[0]), dim),
                                          y.segment(model.factor_offset(n.factors[1]), dim));
      }
      case Kind::Pullback:
        return sing_dist(*n.children[0].node_, sub_model(model, n.factors), project(model, n.factors, y));
      case Kind::Sum:
      case Kind::Scale: {
        double d = kInf;
        for (const auto& c : n.children) d = std::min(d, sing_dist(*c.node_, model, y));
        return d;
      }
      default:
        return kInf;
    }
  }

  static double sup(const Node& n, const Manifold& model) {
    switch (n.kind) {
      case Kind::Constant:
        return std::abs(n.value);
      case Kind::RadialPower:
      case Kind::Coulomb:
      case Kind::CoulombPair:
        return kInf;
      case Kind::IndicatorBall:
      case Kind::IndicatorBox:
        return 1.0;
      case Kind::Bump:
      case Kind::Cosine:
        return std::abs(n.value);
      case Kind::Pullback:
        return sup(*n.children[0].node_, sub_model(model, n.factors));
      case Kind::Sum: {
        double s = 0.0;
        for (const auto& c : n.children) s += sup(*c.node_, model);
        return s;
      }
      case Kind::Scale:
        return std::abs(n.value) * sup(*n.children[0].node_, model);
    }
    return kInf;
  }

  static std::optional<RadialForm> radial(const Node& n, const Manifold& model) {
    if (!model.isotropic()) return std::nullopt;
    RadialForm f;
    switch (n.kind) {
      case Kind::Constant: {
        const double c = n.value;
        f.center = origin(model);
        f.profile = [c](double) { return c; };
        return f;
      }
      case Kind::RadialPower: {
        const double beta = n.value, cut = n.radius;
        f.center = n.center;
        f.has_center = true;
        f.profile = [beta, cut](double r) { return r >= cut ? 0.0 : (r == 0.0 ? kInf : std::pow(r, -beta)); };
        f.singular_exponent = beta;
        f.support = cut;
        if (std::isfinite(cut)) f.breakpoints = {cut};
        f.scale = std::isfinite(cut) ? cut : 1.0;
        return f;
      }
      case Kind::IndicatorBall: {
        const double R = n.radius;
        f.center = n.center;
        f.has_center = true;
        f.profile = [R](double r) { return r <= R ? 1.0 : 0.0; };
        f.support = R;
        f.breakpoints = {R};
        f.scale = R;
        return f;
      }
      case Kind::Bump: {
        const double w = n.radius, h = n.value;
        f.center = n.center;
        f.has_center = true;
        f.profile = [w, h](double r) { return h * std::exp(-r * r / (2.0 * w * w)); };
        f.scale = w;
        f.support = 40.0 * w;
        return f;
      }
      case Kind::Coulomb: {
        if (!(n.table->model() == model)) return std::nullopt;
        auto table = n.table;
        f.center = n.center;
        f.has_center = true;
        f.profile = [table](double r) { return (*table)(r); };
        f.singular_exponent = 1.0;
        f.scale = 1.0;
        return f;
      }
      case Kind::Scale: {
        auto inner = radial(*n.children[0].node_, model);
        if (!inner) return std::nullopt;
        const double c = n.value;
        auto p = inner->profile;
        inner->profile = [c, p](double r) { return c == 0.0 ? 0.0 : c * p(r); };
        return inner;
      }
      case Kind::Sum: {
        std::vector<RadialForm> parts;
        for (const auto& c : n.children) {
          auto p = radial(*c.node_, model);
          if (!p) return std::nullopt;
          parts.push_back(std::move(*p));
        }
        if (parts.empty()) {
          f.center = origin(model);
          f.profile = [](double) { return 0.0; };
          return f;
        }
        for (const auto& p : parts) {
          if (!p.has_center) continue;
          if (f.has_center && detail::distance_unchecked(model, f.center, p.center) > 1e-14) return std::nullopt;
          f.center = p.center;
          f.has_center = true;
        }
        if (!f.has_center) f.center = origin(model);
        f.support = 0.0;
        f.scale = kInf;
        std::vector<std::function<double(double)>> profiles;
        for (const auto& p : parts) {
          profiles.push_back(p.profile);
          f.singular_exponent = std::max(f.singular_exponent, p.singular_exponent);
          f.support = p.has_center ? std::max(f.support, p.support) : kInf;
          f.scale = std::min(f.scale, p.scale);
          f.breakpoints.insert(f.breakpoints.end(), p.breakpoints.begin(), p.breakpoints.end());
        }
        if (!std::isfinite(f.scale)) f.scale = 1.0;
        f.profile = [profiles](double r) {
          double s = 0.0;
          for (const auto& p : profiles) s += p(r);
          return s;
        };
        return f;
      }
      default:
        return std::nullopt;
    }
  }

  static std::string join_center(const Point& c) {
    std::ostringstream os;
    os.precision(17);
    for (int i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
    return os.str();
  }

  static std::string desc(const Node& n) {
    std::ostringstream os;
    os.precision(17);
    switch (n.kind) {
      case Kind::Constant:
        os << "constant:" << n.value;
        break;
      case Kind::RadialPower:
        os << "radialpower:beta=" << n.value << ":center=" << join_center(n.center);
        if (std::isfinite(n.radius)) os << ":cutoff=" << n.radius;
        break;
      case Kind::IndicatorBall:
        os << "indicator:center=" << join_center(n.center) << ":radius=" << n.radius;
        break;
      case Kind::IndicatorBox:
        os << "box:lo=" << join_center(n.lo) << ":hi=" << join_center(n.hi);
        break;
      case Kind::Bump:
        os << "bump:center=" << join_center(n.center) << ":width=" << n.radius << ":height=" << n.value;
        break;
      case Kind::Cosine:
        os << "cosine:amplitude=" << n.value << ":k=" << n.index;
        break;
      case Kind::Coulomb:
        os << "coulomb:center=" << join_center(n.center);
        break;
      case Kind::CoulombPair:
        os << "coulombpair:" << n.factors[0] + 1 << "," << n.factors[1] + 1;
        break;
      case Kind::Pullback:
        os << "pullback:";
        for (std::size_t i = 0; i < n.factors.size(); ++i) os << (i ? "," : "") << n.factors[i] + 1;
        os << ":" << n.children[0].describe();
        break;
      case Kind::Sum:
        os << "sum[";
        for (std::size_t i = 0; i < n.children.size(); ++i) os << (i ? ";" : "") << n.children[i].describe();
        os << "]";
        break;
      case Kind::Scale:
        os << "scale:" << n.value << ":" << n.children[0].describe();
        break;
    }
    return os.str();
  }

  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------------------------
// Parsing

namespace detail {

inline Point parse_point(const std::string& s) {
  std::vector<double> v;
  for (const auto& part : split_top_level(s, ',')) v.push_back(parse_double(part));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Splits "name:key=value:key=value" (nested [..] and (..) kept intact).
inline std::vector<std::string> split_fields(const std::string& s) { return split_top_level(s, ':'); }

}  // namespace detail

/// Parses potential specs such as "radialpower:beta=1:center=0,0,0", "coulomb:center=0,0,0",
/// "pullback:1:<inner>", "sum[<a>;<b>]", "scale:-1:<inner>", "constant:5",
/// "indicator:center=0,0,0:radius=1", "bump:center=...:width=0.3:height=1", "cosine:amplitude=1:k=1".
inline Potential parse_potential(const std::string& text, const Manifold& model,
                                 std::shared_ptr<const CoulombTable> table = nullptr) {
  const std::string s = detail::trim(text);
  if (s.rfind("sum[", 0) == 0) {
    if (s.back() != ']') throw DomainError("sum spec must end with ']'");
    std::vector<Potential> terms;
    const std::string body = s.substr(4, s.size() - 5);
    if (!detail::trim(body).empty())
      for (const auto& part : detail::split_top_level(body, ';')) terms.push_back(parse_potential(part, model, table));
    return Potential::sum(std::move(terms));
  }
  const auto fields = detail::split_fields(s);
  const std::string& name = fields[0];
  auto keyed = [&](const std::string& key) -> std::optional<std::string> {
    for (std::size_t i = 1; i < fields.size(); ++i)
      if (fields[i].rfind(key + "=", 0) == 0) return fields[i].substr(key.size() + 1);
    return std::nullopt;
  };
  auto need = [&](const std::string& key) {
    auto v = keyed(key);
    if (!v) throw DomainError("potential '" + name + "' needs " + key + "=");
    return *v;
  };
  auto rest_after = [&](std::size_t k) {
    // Reassemble everything after the k-th ':' (inner potentials may contain ':').
    std::size_t pos = 0;
    int depth = 0;
    std::size_t seen = 0;
    for (; pos < s.size(); ++pos) {
      if (s[pos] == '[' || s[pos] == '(') ++depth;
      if (s[pos] == ']' || s[pos] == ')') --depth;
      if (s[pos] == ':' && depth == 0 && ++seen == k) break;
    }
    if (pos >= s.size()) throw DomainError("potential spec '" + s + "' is missing its inner potential");
    return s.substr(pos + 1);
  };
  if (name == "zero") return Potential::constant(0.0);
  if (name == "constant") {
    if (fields.size() != 2) throw DomainError("constant potential needs a value");
    const std::string v = fields[1].rfind("c=", 0) == 0 ? fields[1].substr(2) : fields[1];
    return Potential::constant(detail::parse_double(v));
  }
  if (name == "radialpower") {
    const auto cut = keyed("cutoff");
    Point c = keyed("center") ? detail::parse_point(*keyed("center")) : origin(model);
    return Potential::radial_power(c, detail::parse_double(need("beta")), cut ? detail::parse_double(*cut) : kInf);
  }
  if (name == "indicator") {
    Point c = keyed("center") ? detail::parse_point(*keyed("center")) : origin(model);
    return Potential::indicator_ball(c, detail::parse_double(need("radius")));
  }
  if (name == "box") return Potential::indicator_box(detail::parse_point(need("lo")), detail::parse_point(need("hi")));
  if (name == "bump") {
    Point c = keyed("center") ? detail::parse_point(*keyed("center")) : origin(model);
    const auto h = keyed("height");
    return Potential::gaussian_bump(c, detail::parse_double(need("width")), h ? detail::parse_double(*h) : 1.0);
  }
  if (name == "cosine") {
    const auto a = keyed("amplitude");
    const auto k = keyed("k");
    return Potential::cosine(a ? detail::parse_double(*a) : 1.0, k ? detail::parse_int(*k) : 1);
  }
  if (name == "coulomb") {
    Point c = keyed("center") ? detail::parse_point(*keyed("center")) : origin(model);
    if (!table) table = std::make_shared<CoulombTable>(HeatKernelEngine(model));
    return Potential::coulomb(c, table);
  }
  if (name == "scale") {
    if (fields.size() < 3) throw DomainError("scale needs a factor and an inner potential");
    return Potential::scale(detail::parse_double(fields[1]), parse_potential(rest_after(2), model, table));
  }
  if (name == "pullback") {
    if (fields.size() < 3) throw DomainError("pullback needs factor indices and an inner potential");
    if (model.kind() != ModelKind::Product) throw DimensionMismatch("pullback needs a product model");
    std::vector<int> idx;
    for (const auto& p : detail::split_top_level(fields[1], ',')) idx.push_back(detail::parse_int(p) - 1);
    std::vector<Manifold> fs;
    for (int i : idx) {
      if (i < 0 || i >= static_cast<int>(model.factors().size())) throw DimensionMismatch("pullback factor index out of range");
      fs.push_back(model.factors()[i]);
    }
    const Manifold sub = fs.size() == 1 ? fs[0] : Manifold::product(fs);
    return Potential::pullback(idx, parse_potential(rest_after(2), sub, nullptr));
  }
  throw DomainError("unknown potential spec '" + s + "'");
}

// ---------------------------------------------------------------------------------------------
// Many-body assembly

/// Sum over electrons i and nuclei j of -V(x_i, y_j) plus sum over pairs i < j of V(x_i, x_j).
inline Potential many_body_assemble(int electrons, const std::vector<Point>& nuclei, const HeatKernelEngine& engine) {
  if (electrons < 1) throw DomainError("need at least one electron");
  const Manifold& model = engine.model();
  const Manifold base = model.kind() == ModelKind::Product ? model.factors().front() : model;
  const int copies = model.kind() == ModelKind::Product ? static_cast<int>(model.factors().size()) : 1;
  if (copies != electrons) throw DimensionMismatch("model must be a product of one copy of the base per electron");
  if (base.dim() != 3) throw DimensionMismatch("many-body potentials live on products of a 3-dimensional base");
  for (const auto& f : model.kind() == ModelKind::Product ? model.factors() : std::vector<Manifold>{model})
    if (!(f == base)) throw DimensionMismatch("all factors must be the same base model");
  for (const auto& y : nuclei) validate_point(base, y);
  const HeatKernelEngine base_engine = model.kind() == ModelKind::Product ? engine.factor_engines().front() : engine;
  auto table = std::make_shared<const CoulombTable>(base_engine);
  std::vector<Potential> terms;
  for (int i = 0; i < electrons; ++i)
    for (const auto& y : nuclei) {
      Potential v = Potential::scale(-1.0, Potential::coulomb(y, table));
      terms.push_back(electrons == 1 ? v : Potential::pullback({i}, v));
    }
  for (int i = 0; i < electrons; ++i)
    for (int j = i + 1; j < electrons; ++j) terms.push_back(Potential::coulomb_pair(i, j, table));
  return Potential::sum(std::move(terms));
}

// ---------------------------------------------------------------------------------------------
// Weighted L^q norms

struct WeightedLqNorm {
  double q = 1.0;
  double value = 0.0;     // (int |w|^q I dmu)^{1/q}
  bool diverges = false;
  std::string route;      // "radial" or "grid"
  double excision_radius = 0.0;
  double excised_contribution = 0.0;  // int over the excised ball of |w|^q I
  long nodes = 0;
};

inline nlohmann::json to_json(const WeightedLqNorm& n) {
  return {{"q", n.q},
          {"value", std::isfinite(n.value) ? nlohmann::json(n.value) : nlohmann::json("inf")},
          {"diverges", n.diverges},
          {"route", n.route},
          {"excision_radius", n.excision_radius},
          {"excised_contribution", n.excised_contribution}};
}

namespace detail {

// int_0^R |profile|^q A(r) dr for a radial form; power substitution on [0, eps].
inline double radial_lq_integral(const Manifold& model, const RadialForm& f, double q, double R, double eps) {
  const int m = model.dim();
  const double beta_q = f.singular_exponent * q;
  auto g = [&](double r) {
    const double v = std::abs(f.profile(r));
    return v == 0.0 ? 0.0 : std::pow(v, q) * sphere_area(model, r);
  };
  R = std::min(R, max_radius(model));
  std::vector<PanelFeature> feats;
  double lo = 0.0;
  if (f.singular_exponent > 0) {
    lo = std::min(eps, 0.5 * R);
    feats.push_back({lo, std::min(f.scale, R), true, lo});
  } else {
    feats.push_back({0.0, std::min(f.scale, R), false, 0.0});
  }
  for (double b : f.breakpoints)
    if (b > lo && b < R) feats.push_back({b, 0.5, false, 0.0});
  double total = 0.0;
  if (std::isfinite(R)) {
    total = integrate_panels(g, panel_edges(lo, R, feats, 0.5), 8);
  } else {
    const double mid = std::max(1.0, f.breakpoints.empty() ? 1.0 : *std::max_element(f.breakpoints.begin(), f.breakpoints.end()));
    total = integrate_panels(g, panel_edges(lo, mid, feats, 0.5), 8) + integrate_to_infinity(g, mid).value;
  }
  if (lo > 0) {
    const double k = 1.0 / std::max(1e-3, m - beta_q);
    total += gauss_integrate([&](double v) {
      if (v <= 0) return 0.0;
      const double r = lo * std::pow(v, k);
      return g(r) * lo * k * std::pow(v, k - 1.0);
    }, 0.0, 1.0, 16);
  }
  return total;
}

}  // namespace detail

/// (int_W |w|^q I dmu)^{1/q} with I a constant weight, by the reduced radial quadrature over the
/// ball of radius R around the potential's center (R = inf: the whole model).
inline WeightedLqNorm lq_norm_radial(const Potential& w, double q, double weight, const Manifold& model, double R = kInf) {
  if (!(q >= 1)) throw DomainError("lq_norm: q must be at least 1");
  WeightedLqNorm out;
  out.q = q;
  out.route = "radial";
  if (w.is_zero()) return out;
  const auto form = w.radial_form(model);
  if (!form) throw UnsupportedModel("radial L^q route needs a radial potential on an isotropic model");
  if (form->singular_exponent * q >= model.dim()) {
    out.diverges = true;
    out.value = kInf;
    return out;
  }
  const double eps = form->singular_exponent > 0 ? 1e-8 * std::min(1.0, form->scale) : 0.0;
  const double integral = weight * detail::radial_lq_integral(model, *form, q, std::min(R, form->support), eps);
  out.excision_radius = eps;
  out.value = std::isfinite(integral) ? std::pow(integral, 1.0 / q) : kInf;
  out.diverges = !std::isfinite(integral);
  return out;
}

/// Grid quadrature of (sum_i w_i |w(x_i)|^q I(x_i))^{1/q}.  For radial potentials with a
/// singular center the ball of radius eps (default 2h) around it is excised and its
/// contribution added by radial quadrature of the profile.
inline WeightedLqNorm lq_norm(const Potential& w, double q, const std::function<double(PointRef)>& weight,
                              const Manifold& model, const QuadratureGrid& grid, double eps = -1.0) {
  if (!(q >= 1)) throw DomainError("lq_norm: q must be at least 1");
  WeightedLqNorm out;
  out.q = q;
  out.route = "grid";
  out.nodes = grid.size();
  if (w.is_zero()) return out;
  const auto form = w.radial_form(model);
  const bool singular = form && form->singular_exponent > 0;
  if (singular && form->singular_exponent * q >= model.dim()) {
    out.diverges = true;
    out.value = kInf;
    return out;
  }
  if (eps < 0) eps = 2.0 * grid.resolution;
  double sum = 0.0;
  std::vector<double> terms(static_cast<std::size_t>(grid.size()), 0.0);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto y = grid.nodes.col(i);
    if (singular && detail::distance_unchecked(model, form->center, y) < eps) continue;
    const double v = std::abs(w.evaluate(model, y));
    if (!std::isfinite(v)) {
      out.diverges = true;
      continue;
    }
    terms[i] = grid.weights[i] * std::pow(v, q) * weight(y);
  }
  sum = pairwise_sum(terms);
  if (singular && window_contains(model, grid.window, form->center)) {
    RadialForm inner = *form;
    const double excised = weight(form->center) * detail::radial_lq_integral(model, inner, q, eps, 1e-6 * eps);
    out.excised_contribution = excised;
    out.excision_radius = eps;
    sum += excised;
  }
  out.value = out.diverges ? kInf : std::pow(sum, 1.0 / q);
  return out;
}

}  // namespace katokit
