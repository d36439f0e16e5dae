#pragma once

// Brownian motion on the model manifolds by geodesic random walks, Feynman-Kac estimates, the
// finite-dimensional-distribution check, the exponential Kato estimate and the projection
// inequality for products.

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "heat_kernel.hpp"
#include "json.hpp"
#include "kato.hpp"
#include "numerics.hpp"
#include "potentials.hpp"

namespace katokit {

enum class Scheme { GeodesicWalk, ChartEuler };

inline std::string to_string(Scheme s) { return s == Scheme::GeodesicWalk ? "geodesic-walk" : "chart-euler"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "geodesic-walk" || s == "geodesic") return Scheme::GeodesicWalk;
  if (s == "chart-euler" || s == "euler") return Scheme::ChartEuler;
  throw DomainError("unknown scheme '" + s + "'");
}

struct SimulationConfig {
  Manifold model = Manifold::euclidean(1);
  Point start;
  double t = 1.0;
  double h = 1e-3;
  long paths = 1000;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::GeodesicWalk;
  int threads = 1;

  long steps() const { return std::max(1L, static_cast<long>(std::ceil(t / h - 1e-9))); }
  double dt() const { return t / steps(); }
};

/// Independent stream per path: mt19937_64 seeded from (seed, path index), so results do not
/// depend on how paths are split across workers.
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), 0x6b61746fu};
  return std::mt19937_64(seq);
}

inline void validate_config(const SimulationConfig& c) {
  validate_point(c.model, c.start);
  if (!(c.t > 0)) throw DomainError("simulation horizon must be positive");
  if (!(c.h > 0) || c.h > c.t * (1 + 1e-12)) throw DomainError("step must satisfy 0 < h <= t");
  if (c.paths < 1) throw DomainError("need at least one path");
  if (c.scheme == Scheme::ChartEuler && c.model.kind() != ModelKind::Euclidean && c.model.kind() != ModelKind::Torus &&
      c.model.kind() != ModelKind::Circle)
    throw UnsupportedModel("chart Euler steps are available on flat models only");
}

inline std::vector<std::string> simulation_warnings(const SimulationConfig& c) {
  std::vector<std::string> w;
  auto curved = [](const Manifold& m) { return m.kind() == ModelKind::Sphere2 || m.kind() == ModelKind::Hyperbolic3; };
  bool any = curved(c.model);
  for (const auto& f : c.model.factors()) any = any || curved(f);
  if (any && c.h > 0.01) w.push_back("step h > 0.01 on a curved model: weak error may dominate");
  return w;
}

/// Walks path `index`, calling visit(step, time, point) for step = 0..steps.
template <class Visit>
void walk_path(const SimulationConfig& c, std::uint64_t index, Visit&& visit) {
  auto rng = path_rng(c.seed, index);
  const long n = c.steps();
  const double dt = c.dt();
  Point x = c.start;
  visit(0L, 0.0, x);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(dt);
  for (long k = 1; k <= n; ++k) {
    if (c.scheme == Scheme::ChartEuler) {
      for (int i = 0; i < x.size(); ++i) x[i] += sd * normal(rng);
      if (c.model.kind() != ModelKind::Euclidean) {
        const double period = c.model.kind() == ModelKind::Circle ? 2.0 * kPi : c.model.side();
        for (int i = 0; i < x.size(); ++i) x[i] = detail::wrap(x[i], period);
      }
    } else {
      x = detail::exp_map_unchecked(c.model, x, gaussian_tangent(c.model, x, dt, rng));
    }
    visit(k, k * dt, x);
  }
}

/// Runs body(path) for every path, split into contiguous blocks over `threads` workers.
template <class Body>
void for_each_path(long paths, int threads, Body&& body) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>((paths + 1023) / 1024)));
  if (threads == 1) {
    for (long p = 0; p < paths; ++p) body(p);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (paths + threads - 1) / threads;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (long p = w * chunk; p < std::min(paths, (w + 1) * chunk); ++p) body(p);
    });
  for (auto& th : pool) th.join();
}

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
};

/// Mean and standard error with pairwise summation in path order.
inline MeanEstimate estimate_mean(const std::vector<double>& v) {
  MeanEstimate e;
  e.n = static_cast<long>(v.size());
  if (v.empty()) return e;
  e.mean = pairwise_sum(v) / e.n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - e.mean) * (v[i] - e.mean);
  const double var = e.n > 1 ? pairwise_sum(sq) / (e.n - 1) : 0.0;
  e.std_error = std::sqrt(var / e.n);
  return e;
}

// ---------------------------------------------------------------------------------------------
// Ensembles

struct PathEnsemble {
  SimulationConfig config;
  std::vector<double> record_times;        // snapped to the step grid
  std::vector<Eigen::MatrixXd> snapshots;  // per record time, chart_dim x paths
  std::vector<double> lifetimes;           // +inf: no explosion and no window exit
  std::vector<std::string> warnings;

  const Manifold& model() const { return config.model; }
  long paths() const { return config.paths; }
};

inline PathEnsemble simulate(const SimulationConfig& c, std::vector<double> record_times = {}) {
  validate_config(c);
  if (record_times.empty()) record_times = {c.t};
  PathEnsemble e;
  e.config = c;
  e.warnings = simulation_warnings(c);
  std::vector<long> rec_steps;
  for (double t : record_times) {
    if (!(t > 0) || t > c.t * (1 + 1e-12)) throw DomainError("record time outside (0, t]");
    const long k = std::lround(t / c.dt());
    rec_steps.push_back(k);
    e.record_times.push_back(k * c.dt());
  }
  const int dim = c.model.chart_dim();
  e.snapshots.assign(record_times.size(), Eigen::MatrixXd(dim, c.paths));
  e.lifetimes.assign(c.paths, kInf);
  for_each_path(c.paths, c.threads, [&](long p) {
    walk_path(c, p, [&](long k, double, const Point& x) {
      for (std::size_t r = 0; r < rec_steps.size(); ++r)
        if (rec_steps[r] == k) e.snapshots[r].col(p) = x;
    });
  });
  return e;
}

inline nlohmann::json summary(const PathEnsemble& e) {
  nlohmann::json snaps = nlohmann::json::array();
  for (std::size_t r = 0; r < e.record_times.size(); ++r) {
    const Eigen::VectorXd mean = e.snapshots[r].rowwise().mean();
    snaps.push_back({{"t", e.record_times[r]}, {"chart_mean", std::vector<double>(mean.data(), mean.data() + mean.size())}});
  }
  return {{"model", e.model().spec()},
          {"paths", e.paths()},
          {"t", e.config.t},
          {"h", e.config.dt()},
          {"seed", e.config.seed},
          {"scheme", to_string(e.config.scheme)},
          {"snapshots", snaps},
          {"warnings", e.warnings}};
}

/// CSV rows "path,t,coords..." for the first max_paths paths.
inline void dump_paths(const SimulationConfig& c, std::ostream& out, long max_paths = 10) {
  validate_config(c);
  out.precision(17);
  for (long p = 0; p < std::min(max_paths, c.paths); ++p)
    walk_path(c, p, [&](long, double t, const Point& x) {
      out << p << "," << t;
      for (int i = 0; i < x.size(); ++i) out << "," << x[i];
      out << "\n";
    });
}

// ---------------------------------------------------------------------------------------------
// Finite-dimensional distributions

using TestFunction = std::function<double(PointRef)>;

struct FddReport {
  std::vector<double> times;
  double mc = 0.0;
  double std_error = 0.0;
  double exact = 0.0;
  double quadrature_error = 0.0;
  double z = 0.0;
};

inline nlohmann::json to_json(const FddReport& r) {
  return {{"times", r.times}, {"mc", r.mc}, {"std_error", r.std_error}, {"exact", r.exact}, {"z", r.z}};
}

/// Right side of E[f_1(X_{t_1}) ... f_l(X_{t_l})] = int p(t_1,x,y_1) f_1(y_1) int p(t_2-t_1,y_1,y_2) ...
/// by nested quadrature on a grid (l <= 2).
inline double fdd_quadrature(const HeatKernelEngine& engine, PointRef x, const std::vector<double>& times,
                             const std::vector<TestFunction>& fs, const QuadratureGrid& grid) {
  if (times.size() != fs.size() || times.empty() || times.size() > 2) throw DomainError("fdd quadrature supports l = 1 or 2");
  const Eigen::Index n = grid.size();
  Eigen::VectorXd inner = Eigen::VectorXd::Ones(n);
  if (times.size() == 2) {
    const double dt = times[1] - times[0];
    Eigen::VectorXd f2(n);
    for (Eigen::Index j = 0; j < n; ++j) f2[j] = grid.weights[j] * fs[1](grid.nodes.col(j));
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += engine.eval_unchecked(dt, grid.nodes.col(i), grid.nodes.col(j)).value * f2[j];
      inner[i] = s;
    }
  }
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    terms[i] = grid.weights[i] * engine.eval_unchecked(times[0], x, grid.nodes.col(i)).value * fs[0](grid.nodes.col(i)) * inner[i];
  return pairwise_sum(terms);
}

inline FddReport fdd_check(const PathEnsemble& e, const std::vector<std::size_t>& record_index, const std::vector<TestFunction>& fs,
                           double exact, double quadrature_error = 0.0) {
  FddReport r;
  std::vector<double> v(e.paths());
  for (long p = 0; p < e.paths(); ++p) {
    double prod = 1.0;
    for (std::size_t k = 0; k < fs.size(); ++k) prod *= fs[k](e.snapshots[record_index[k]].col(p));
    v[p] = prod;
  }
  const auto m = estimate_mean(v);
  for (auto i : record_index) r.times.push_back(e.record_times[i]);
  r.mc = m.mean;
  r.std_error = m.std_error;
  r.exact = exact;
  r.quadrature_error = quadrature_error;
  const double scale = std::hypot(m.std_error, quadrature_error);
  r.z = scale > 0 ? (m.mean - exact) / scale : (m.mean == exact ? 0.0 : kInf);
  return r;
}

/// Same check with the exact side from nested grid quadrature.
inline FddReport fdd_check(const PathEnsemble& e, const HeatKernelEngine& engine, const std::vector<std::size_t>& record_index,
                           const std::vector<TestFunction>& fs, const QuadratureGrid& grid) {
  std::vector<double> times;
  for (auto i : record_index) times.push_back(e.record_times[i]);
  const double exact = fdd_quadrature(engine, e.config.start, times, fs, grid);
  return fdd_check(e, record_index, fs, exact);
}

struct ChiSquareReport {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
  bool pass = false;  // p >= level
};

/// Pearson chi-square of a scalar statistic g(X) against bin probabilities.
inline ChiSquareReport chi_square_test(const std::vector<double>& samples, const std::vector<double>& edges,
                                       const std::vector<double>& probabilities, double level = 0.01) {
  ChiSquareReport r;
  const std::size_t k = probabilities.size();
  std::vector<double> counts(k, 0.0);
  for (double s : samples) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), s);
    const long b = std::clamp<long>(static_cast<long>(it - edges.begin()) - 1, 0, static_cast<long>(k) - 1);
    counts[b] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < k; ++i) {
    const double expected = n * probabilities[i];
    r.statistic += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  r.dof = static_cast<int>(k) - 1;
  boost::math::chi_squared_distribution<double> dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  r.pass = r.p_value >= level;
  return r;
}

// ---------------------------------------------------------------------------------------------
// Feynman-Kac

struct FeynmanKacEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long paths = 0;
  std::string potential;
  std::string rule = "trapezoid";
  double cap_radius = 0.0;
  double capped_fraction = 0.0;
  std::vector<std::string> warnings;
};

inline nlohmann::json to_json(const FeynmanKacEstimate& f) {
  return {{"value", json_number(f.value)}, {"std_error", json_number(f.std_error)}, {"paths", f.paths},
          {"potential", f.potential}, {"rule", f.rule}, {"cap_radius", f.cap_radius},
          {"capped_fraction", f.capped_fraction}, {"warnings", f.warnings}};
}

namespace detail {

// Trapezoid time integrals of w along a path at every step, with singular values read at
// distance sqrt(h) from the singularity.
struct PathIntegral {
  std::vector<double> cumulative;  // int_0^{t_k} w(X_s) ds
  Point end;
  bool capped = false;
};

inline PathIntegral integrate_along(const SimulationConfig& c, long path, const Potential& w, double eps) {
  PathIntegral out;
  out.cumulative.resize(c.steps() + 1);
  const double dt = c.dt();
  double prev = 0.0, acc = 0.0;
  walk_path(c, path, [&](long k, double, const Point& x) {
    double v;
    if (w.singular_distance(c.model, x) < eps) {
      v = w.evaluate_capped(c.model, x, eps);
      out.capped = true;
    } else {
      v = w.evaluate(c.model, x);
    }
    if (k > 0) acc += 0.5 * dt * (prev + v);
    out.cumulative[k] = acc;
    prev = v;
    if (k == c.steps()) out.end = x;
  });
  return out;
}

}  // namespace detail

/// E[exp(-int_0^t w(X_s) ds) f(X_t)].
inline FeynmanKacEstimate feynman_kac(const SimulationConfig& c, const Potential& w, const TestFunction& f) {
  validate_config(c);
  FeynmanKacEstimate est;
  est.paths = c.paths;
  est.potential = w.describe();
  est.cap_radius = std::sqrt(c.dt());
  est.warnings = simulation_warnings(c);
  std::vector<double> vals(c.paths);
  std::vector<char> capped(c.paths, 0);
  for_each_path(c.paths, c.threads, [&](long p) {
    const auto pi = detail::integrate_along(c, p, w, est.cap_radius);
    vals[p] = std::exp(-pi.cumulative.back()) * f(pi.end);
    capped[p] = pi.capped;
  });
  const auto m = estimate_mean(vals);
  est.value = m.mean;
  est.std_error = m.std_error;
  est.capped_fraction = static_cast<double>(std::count(capped.begin(), capped.end(), 1)) / c.paths;
  if (est.capped_fraction > 0.01) est.warnings.push_back("more than 1% of paths were capped near a singularity");
  return est;
}

// ---------------------------------------------------------------------------------------------
// Exponential Kato estimate  sup_x E[exp(int_0^t w_-(X_s) ds)] <= delta e^{t C(delta)}

struct ExponentialRow {
  double delta = 0.0;
  double C = 0.0;
  double margin_min = 0.0;  // min_t log(delta e^{tC} / E_t)
};

struct ExponentialEstimate {
  std::vector<double> t_values;
  std::vector<double> sup_expectation;  // sup over starts of E_t
  std::vector<double> std_error;
  std::vector<ExponentialRow> rows;
  bool overflow = false;
  double capped_fraction = 0.0;
};

inline nlohmann::json to_json(const ExponentialEstimate& e) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : e.rows) rows.push_back({{"delta", r.delta}, {"C", json_number(r.C)}, {"margin_min", json_number(r.margin_min)}});
  return {{"t", e.t_values}, {"sup_expectation", e.sup_expectation}, {"std_error", e.std_error}, {"table", rows},
          {"overflow", e.overflow}, {"capped_fraction", e.capped_fraction}};
}

/// C(delta) = max(0, log N(t_max)/t_max, max_t (log N(t) - log delta)/t): the smallest rate that
/// makes N(t) <= delta e^{tC} on the grid and that is not below the growth rate seen at t_max.
inline ExponentialRow fit_exponential_constant(const std::vector<double>& ts, const std::vector<double>& norms, double delta) {
  ExponentialRow row;
  row.delta = delta;
  double C = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (ts[i] > ts[last]) last = i;
  if (ts[last] > 0) C = std::max(C, std::log(norms[last]) / ts[last]);
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (ts[i] > 0) C = std::max(C, (std::log(norms[i]) - std::log(delta)) / ts[i]);
  row.C = C;
  row.margin_min = kInf;
  for (std::size_t i = 0; i < ts.size(); ++i) row.margin_min = std::min(row.margin_min, std::log(delta) + ts[i] * C - std::log(norms[i]));
  return row;
}

inline ExponentialEstimate kato_exponential_estimate(const Manifold& model, const Potential& w_minus, const std::vector<Point>& starts,
                                                     const std::vector<double>& ts, const std::vector<double>& deltas, long paths,
                                                     double h, std::uint64_t seed, int threads = 1) {
  ExponentialEstimate out;
  out.t_values = ts;
  const double t_max = *std::max_element(ts.begin(), ts.end());
  out.sup_expectation.assign(ts.size(), 0.0);
  out.std_error.assign(ts.size(), 0.0);
  long capped_total = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    SimulationConfig c;
    c.model = model;
    c.start = starts[s];
    c.t = t_max;
    c.h = h;
    c.paths = paths;
    c.seed = seed + 7919 * s;
    c.threads = threads;
    validate_config(c);
    std::vector<std::vector<double>> vals(ts.size(), std::vector<double>(paths));
    std::vector<char> capped(paths, 0);
    const double eps = std::sqrt(c.dt());
    for_each_path(paths, threads, [&](long p) {
      const auto pi = detail::integrate_along(c, p, w_minus, eps);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const long k = std::lround(ts[i] / c.dt());
        vals[i][p] = std::exp(pi.cumulative[k]);
      }
      capped[p] = pi.capped;
    });
    capped_total += std::count(capped.begin(), capped.end(), 1);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto m = estimate_mean(vals[i]);
      if (!std::isfinite(m.mean)) out.overflow = true;
      if (m.mean > out.sup_expectation[i]) {
        out.sup_expectation[i] = m.mean;
        out.std_error[i] = m.std_error;
      }
    }
  }
  out.capped_fraction = static_cast<double>(capped_total) / (paths * static_cast<double>(starts.size()));
  if (!out.overflow)
    for (double d : deltas) out.rows.push_back(fit_exponential_constant(ts, out.sup_expectation, d));
  return out;
}

// ---------------------------------------------------------------------------------------------
// Projection inequality  int_M p(t,x,y)|w(pi y)| <= int_{M'} p'(t,pi x,z)|w(z)|

struct ProjectionOptions {
  double t = 0.5;
  long paths = 10000;
  std::uint64_t seed = 1;
  double h_index = 0.4;  // grid on the factor carrying w
  double h_fiber = 0.5;  // grid on the other factor
  double h_walk = 1e-2;
  int threads = 1;
};

struct ProjectionReport {
  double lhs_quadrature = 0.0;
  double rhs_quadrature = 0.0;
  double quadrature_error = 0.0;
  double lhs_mc = 0.0;
  double mc_std_error = 0.0;
  double defect_quadrature = 0.0;  // lhs - rhs
  double defect_mc = 0.0;
  long index_nodes = 0;
  long fiber_nodes = 0;
  ChiSquareReport chi_square;
  bool pass = false;
};

inline nlohmann::json to_json(const ProjectionReport& r) {
  return {{"lhs_quadrature", r.lhs_quadrature}, {"rhs_quadrature", r.rhs_quadrature}, {"quadrature_error", r.quadrature_error},
          {"lhs_mc", r.lhs_mc}, {"mc_std_error", r.mc_std_error}, {"defect_quadrature", r.defect_quadrature},
          {"defect_mc", r.defect_mc}, {"index_nodes", r.index_nodes}, {"fiber_nodes", r.fiber_nodes},
          {"chi_square_p", r.chi_square.p_value}, {"verdict", r.pass ? "PASS" : "FAIL"}};
}

namespace detail {

inline QuadratureGrid factor_grid(const Manifold& f, PointRef x, double t, double h) {
  if (f.compact()) return build_grid(f, h);
  return build_grid(f, h, Window::ball(x, 7.0 * std::sqrt(t) + 0.5));
}

inline double factor_rhs(const HeatKernelEngine& fe, const Potential& w, double t, PointRef x, const QuadratureGrid& g,
                         std::vector<double>* terms = nullptr) {
  std::vector<double> v(static_cast<std::size_t>(g.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i)
    v[i] = g.weights[i] * fe.eval_unchecked(t, x, g.nodes.col(i)).value * std::abs(w.evaluate(fe.model(), g.nodes.col(i)));
  if (terms) *terms = v;
  return pairwise_sum(v);
}

}  // namespace detail

/// Both sides by quadrature (the left one over the tensor grid of a two-factor product with the
/// product kernel), the left one also by Monte Carlo on projected product paths, and a
/// chi-square test of the projected distance law against the factor kernel.  PASS iff the
/// quadrature defect |lhs - rhs| stays within the quadrature error, |lhs_mc - rhs| < 3 (MC +
/// quadrature error) and the chi-square test passes.
inline ProjectionReport elworthy_projection_check(const HeatKernelEngine& product, std::size_t index, const Potential& w,
                                                  PointRef x, const ProjectionOptions& opt) {
  const Manifold& model = product.model();
  if (model.kind() != ModelKind::Product) throw DimensionMismatch("projection check needs a product model");
  const auto& fs = model.factors();
  if (index >= fs.size()) throw DimensionMismatch("projection index out of range");
  if (fs.size() != 2) throw UnsupportedModel("projection quadrature is implemented for two factors");
  validate_point(model, x);
  const double t = opt.t;
  const std::size_t other = 1 - index;
  const Point xi = x.segment(model.factor_offset(index), fs[index].chart_dim());
  const Point xo = x.segment(model.factor_offset(other), fs[other].chart_dim());
  const HeatKernelEngine& fe = product.factor_engines()[index];
  const HeatKernelEngine& oe = product.factor_engines()[other];
  ProjectionReport rep;
  const auto g = detail::factor_grid(fs[index], xi, t, opt.h_index);
  const auto go = detail::factor_grid(fs[other], xo, t, opt.h_fiber);
  rep.index_nodes = g.size();
  rep.fiber_nodes = go.size();
  std::vector<double> rhs_terms;
  rep.rhs_quadrature = detail::factor_rhs(fe, w, t, xi, g, &rhs_terms);
  const double rhs_fine = detail::factor_rhs(fe, w, t, xi, detail::factor_grid(fs[index], xi, t, 0.5 * opt.h_index));
  // Left side.  Index nodes whose right-side term is below 1e-14 rhs are skipped; their total
  // is added to the error.
  const double cut = 1e-14 * rep.rhs_quadrature;
  double pruned = 0.0;
  Point y(model.chart_dim());
  std::vector<double> outer(g.size(), 0.0), row(go.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (rhs_terms[i] <= cut) {
      pruned += rhs_terms[i];
      continue;
    }
    const double wv = std::abs(w.evaluate(fs[index], g.nodes.col(i)));
    y.segment(model.factor_offset(index), fs[index].chart_dim()) = g.nodes.col(i);
    for (Eigen::Index j = 0; j < go.size(); ++j) {
      y.segment(model.factor_offset(other), fs[other].chart_dim()) = go.nodes.col(j);
      row[j] = go.weights[j] * product.eval_unchecked(t, x, y).value;
    }
    outer[i] = g.weights[i] * wv * pairwise_sum(row);
  }
  rep.lhs_quadrature = pairwise_sum(outer);
  // Quadrature error: fiber mass defect, window tails, pruning and the index-grid resolution.
  const double fiber_mass = go.integrate([&](PointRef z) { return oe.eval_unchecked(t, xo, z).value; });
  const double fiber_tail = fs[other].compact() ? 0.0 : kernel_tail_mass(oe, t, xo, go.window);
  const double index_tail = fs[index].compact() ? 0.0 : kernel_tail_mass(fe, t, xi, g.window) * w.sup_abs(fs[index]);
  rep.quadrature_error = std::abs(1.0 - fiber_mass - fiber_tail) * rep.rhs_quadrature + fiber_tail * rep.rhs_quadrature +
                         index_tail + pruned + std::abs(rhs_fine - rep.rhs_quadrature) + 1e-14;
  rep.defect_quadrature = rep.lhs_quadrature - rep.rhs_quadrature;
  // Monte Carlo on projected product paths.
  SimulationConfig c;
  c.model = model;
  c.start = x;
  c.t = t;
  c.h = std::min(opt.h_walk, t);
  c.paths = opt.paths;
  c.seed = opt.seed;
  c.threads = opt.threads;
  const auto ens = simulate(c);
  std::vector<double> vals(opt.paths), dists(opt.paths);
  const int off = model.factor_offset(index), dim = fs[index].chart_dim();
  for (long p = 0; p < opt.paths; ++p) {
    const Point z = ens.snapshots[0].col(p).segment(off, dim);
    vals[p] = std::abs(w.evaluate(fs[index], z));
    dists[p] = detail::distance_unchecked(fs[index], xi, z);
  }
  const auto m = estimate_mean(vals);
  rep.lhs_mc = m.mean;
  rep.mc_std_error = m.std_error;
  rep.defect_mc = rep.lhs_mc - rep.rhs_quadrature;
  // Projected distance law against the factor kernel (isotropic factors).
  if (fs[index].isotropic()) {
    const double R = max_radius(fs[index]);
    const double reach = std::min(5.0 * std::sqrt(t), R);
    const int bins = 20;
    std::vector<double> edges, probs;
    for (int b = 0; b <= bins; ++b) edges.push_back(reach * b / bins);
    auto dens = [&](double r) { return fe.eval_distance(t, r).value * sphere_area(fs[index], r); };
    double total = 0.0;
    for (int b = 0; b < bins; ++b) {
      double pb = integrate_adaptive(dens, edges[b], edges[b + 1], 1e-15, 1e-12).value;
      if (b + 1 == bins && reach < R)
        pb += std::isfinite(R) ? integrate_adaptive(dens, reach, R, 1e-15, 1e-12).value : integrate_to_infinity(dens, reach, 1e-15, 1e-12).value;
      probs.push_back(pb);
      total += pb;
    }
    for (auto& pb : probs) pb /= total;
    edges.back() = kInf;
    rep.chi_square = chi_square_test(dists, edges, probs);
  } else {
    rep.chi_square.pass = true;
    rep.chi_square.p_value = 1.0;
  }
  rep.pass = std::abs(rep.defect_quadrature) <= rep.quadrature_error &&
             std::abs(rep.defect_mc) < 3.0 * (rep.mc_std_error + rep.quadrature_error) && rep.chi_square.pass;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Stochastic completeness probe

struct CompletenessRow {
  double t = 0.0;
  double mc = 0.0;         // fraction inside the window plus the analytic mass outside it
  double std_error = 0.0;
  double mass_defect = 0.0; // |int p dmu - 1| by quadrature
};

inline std::vector<CompletenessRow> stochastic_completeness_probe(const HeatKernelEngine& engine, PointRef x,
                                                                  const std::vector<double>& ts, long paths, double h,
                                                                  std::uint64_t seed) {
  const Manifold& model = engine.model();
  SimulationConfig c;
  c.model = model;
  c.start = x;
  c.t = *std::max_element(ts.begin(), ts.end());
  c.h = h;
  c.paths = paths;
  c.seed = seed;
  const auto ens = simulate(c, ts);
  std::vector<CompletenessRow> rows;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CompletenessRow row;
    row.t = ens.record_times[i];
    Window win = Window::full();
    if (!model.compact()) {
      if (model.isotropic()) {
        win = Window::ball(x, 5.0 * std::sqrt(row.t));
      } else {
        std::vector<Window> parts;
        for (std::size_t f = 0; f < model.factors().size(); ++f) {
          const auto& fm = model.factors()[f];
          const Point xf = x.segment(model.factor_offset(f), fm.chart_dim());
          parts.push_back(fm.compact() ? Window::full() : Window::ball(xf, 5.0 * std::sqrt(row.t)));
        }
        win = Window::product(parts);
      }
    }
    std::vector<double> inside(paths);
    for (long p = 0; p < paths; ++p) inside[p] = (std::isfinite(ens.lifetimes[p]) ? 0.0 : 1.0) * window_contains(model, win, ens.snapshots[i].col(p));
    const auto m = estimate_mean(inside);
    const double tail = win.kind == Window::Kind::Full ? 0.0 : kernel_tail_mass(engine, row.t, x, win);
    row.mc = m.mean + tail;
    row.std_error = m.std_error;
    const auto rep = check_consistency(engine, {row.t}, {Point(x)});
    row.mass_defect = rep.mass_defect;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace katokit
