#pragma once

// One-dimensional quadrature and small numerical helpers shared by every module.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

namespace katokit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = std::numbers::pi;

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

namespace detail {

inline GaussRule compute_gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace detail

inline constexpr int kMaxGaussOrder = 96;

/// Gauss-Legendre rule of order n on [-1, 1]; tables are built once and shared.
inline const GaussRule& gauss_legendre(int n) {
  static const std::vector<GaussRule> table = [] {
    std::vector<GaussRule> t(kMaxGaussOrder + 1);
    for (int k = 1; k <= kMaxGaussOrder; ++k) t[k] = detail::compute_gauss_legendre(k);
    return t;
  }();
  if (n < 1 || n > kMaxGaussOrder) throw std::invalid_argument("gauss_legendre: unsupported order");
  return table[n];
}

/// Fixed Gauss-Legendre quadrature of f over [a, b].
template <class F>
double gauss_integrate(F&& f, double a, double b, int order = 8) {
  const GaussRule& rule = gauss_legendre(order);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (int i = 0; i < order; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

struct IntegralResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gauss_kronrod_15(F& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const double fc = f(mid);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double f1 = f(mid - dx);
    const double f2 = f(mid + dx);
    kronrod += kKronrodWeights[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * (f1 + f2);
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) integration of f over [a, b].
template <class F>
IntegralResult integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-13, double rel_tol = 1e-11,
                                  int max_segments = 4000) {
  if (a == b) return {};
  if (!(b > a)) {
    IntegralResult r = integrate_adaptive(f, b, a, abs_tol, rel_tol, max_segments);
    r.value = -r.value;
    return r;
  }
  std::priority_queue<detail::Segment> queue;
  auto first = detail::gauss_kronrod_15(f, a, b);
  double total = first.value;
  double error = first.error;
  queue.push(first);
  int segments = 1;
  while (error > std::max(abs_tol, rel_tol * std::abs(total)) && segments < max_segments) {
    if (!std::isfinite(total)) return {total, kInf, false};
    detail::Segment worst = queue.top();
    queue.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (m <= worst.a || m >= worst.b) {
      queue.push(worst);
      break;
    }
    auto left = detail::gauss_kronrod_15(f, worst.a, m);
    auto right = detail::gauss_kronrod_15(f, m, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++segments;
  }
  // Resum to remove drift from the incremental updates.
  double value = 0.0;
  double err = 0.0;
  while (!queue.empty()) {
    value += queue.top().value;
    err += queue.top().error;
    queue.pop();
  }
  return {value, err, err <= std::max(abs_tol, rel_tol * std::abs(value))};
}

/// Integral over [a, inf) through the map r = a + u / (1 - u).
template <class F>
IntegralResult integrate_to_infinity(F&& f, double a, double abs_tol = 1e-13, double rel_tol = 1e-11) {
  auto mapped = [&](double u) {
    if (u >= 1.0) return 0.0;
    const double one_minus = 1.0 - u;
    const double r = a + u / one_minus;
    const double v = f(r);
    return v == 0.0 ? 0.0 : v / (one_minus * one_minus);
  };
  return integrate_adaptive(mapped, 0.0, 1.0, abs_tol, rel_tol);
}

/// A point near which panels must be refined.  Non-singular features get a band of
/// uniform panels of the given width; singular ones are graded geometrically down to `floor`.
struct PanelFeature {
  double at = 0.0;
  double width = 1.0;
  bool singular = false;
  double floor = 0.0;
};

/// Panel edges covering [a, b] that honor the features and never exceed h_max.
inline std::vector<double> panel_edges(double a, double b, std::span<const PanelFeature> features, double h_max) {
  std::vector<double> edges{a};
  if (!(b > a)) return edges;
  std::vector<double> stops;
  for (const auto& f : features)
    if (f.at > a && f.at < b) stops.push_back(f.at);
  std::sort(stops.begin(), stops.end());
  auto desired = [&](double r) {
    double h = h_max;
    for (const auto& f : features) {
      const double delta = std::abs(r - f.at);
      double g;
      if (f.singular) {
        const double floor = f.floor > 0 ? f.floor : 1e-12 * f.width;
        const double d = f.at > r ? 0.5 * delta : delta;
        g = std::min(f.width, std::max(d, floor));
      } else {
        const double band = 12.0 * f.width;
        g = delta <= band ? f.width : std::max(f.width, delta - band);
      }
      h = std::min(h, g);
    }
    return h;
  };
  double r = a;
  std::size_t next_stop = 0;
  int guard = 0;
  while (r < b && guard++ < 100000) {
    while (next_stop < stops.size() && stops[next_stop] <= r) ++next_stop;
    const double limit = next_stop < stops.size() ? stops[next_stop] : b;
    double step = desired(r);
    double next = r + step;
    // Snap to the stop when close, so singular approaches terminate.
    double snap_floor = 0.0;
    for (const auto& f : features)
      if (f.at == limit && f.singular) snap_floor = f.floor > 0 ? f.floor : 1e-12 * f.width;
    if (next >= limit - std::max(snap_floor, 1e-15 * std::max(1.0, std::abs(limit)))) next = limit;
    // Avoid a sliver panel before the stop.
    if (next < limit && limit - next < 0.25 * step && snap_floor == 0.0) next = limit;
    edges.push_back(next);
    r = next;
  }
  if (edges.back() != b) edges.back() = b;
  return edges;
}

/// Fixed-order Gauss-Legendre over consecutive panels.
template <class F>
double integrate_panels(F&& f, std::span<const double> edges, int order = 8) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) total += gauss_integrate(f, edges[i], edges[i + 1], order);
  return total;
}

/// Expands panels into flat (node, weight) lists.
inline void panel_nodes(std::span<const double> edges, int order, std::vector<double>& nodes,
                        std::vector<double>& weights) {
  const GaussRule& rule = gauss_legendre(order);
  nodes.clear();
  weights.clear();
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double half = 0.5 * (edges[i + 1] - edges[i]);
    const double mid = 0.5 * (edges[i + 1] + edges[i]);
    for (int k = 0; k < order; ++k) {
      nodes.push_back(mid + half * rule.nodes[k]);
      weights.push_back(half * rule.weights[k]);
    }
  }
}

/// Pairwise (tree) summation; the result depends only on the order of the inputs.
inline double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct PowerLawFit {
  double coefficient = 0.0;  // c in y = c * x^exponent
  double exponent = 0.0;
  double residual = 0.0;     // max |log y - log fit|
  int points = 0;
};

/// Least-squares fit of log y = log c + gamma log x over positive finite samples.
inline PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0) || !std::isfinite(y[i])) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  PowerLawFit fit;
  fit.points = n;
  if (n < 2) return fit;
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return fit;
  fit.exponent = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - fit.exponent * sx) / n;
  fit.coefficient = std::exp(intercept);
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0) || !std::isfinite(y[i])) continue;
    fit.residual = std::max(fit.residual, std::abs(std::log(y[i]) - intercept - fit.exponent * std::log(x[i])));
  }
  return fit;
}

inline std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < count; ++i) out[i] = std::exp(a + (b - a) * i / (count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace katokit
