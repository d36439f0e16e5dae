#pragma once

// Quadrature grids approximating the volume measure of a model (or a compact window of it).

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "numerics.hpp"

namespace katokit {

struct Window {
  enum class Kind { Full, Box, Ball, Product };
  Kind kind = Kind::Full;
  Eigen::VectorXd lo, hi;      // Box, chart coordinates
  Point center;                // Ball
  double radius = 0.0;         // Ball
  std::vector<Window> parts;   // Product, one window per factor

  static Window full() { return {}; }
  static Window box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    Window w;
    w.kind = Kind::Box;
    w.lo = std::move(lo);
    w.hi = std::move(hi);
    return w;
  }
  static Window cube(int dim, double half_width) {
    return box(Eigen::VectorXd::Constant(dim, -half_width), Eigen::VectorXd::Constant(dim, half_width));
  }
  static Window ball(Point center, double radius) {
    Window w;
    w.kind = Kind::Ball;
    w.center = std::move(center);
    w.radius = radius;
    return w;
  }
  static Window product(std::vector<Window> parts) {
    Window w;
    w.kind = Kind::Product;
    w.parts = std::move(parts);
    return w;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::Full:
        os << "full";
        break;
      case Kind::Box:
        os << "box[" << lo.transpose() << " ; " << hi.transpose() << "]";
        break;
      case Kind::Ball:
        os << "ball(center=" << center.transpose() << ", radius=" << radius << ")";
        break;
      case Kind::Product:
        os << "product(";
        for (std::size_t i = 0; i < parts.size(); ++i) os << (i ? ", " : "") << parts[i].describe();
        os << ")";
        break;
    }
    return os.str();
  }
};

inline bool window_contains(const Manifold& model, const Window& w, PointRef y) {
  switch (w.kind) {
    case Window::Kind::Full:
      return true;
    case Window::Kind::Box:
      return ((y.array() >= w.lo.array()) && (y.array() <= w.hi.array())).all();
    case Window::Kind::Ball:
      return detail::distance_unchecked(model, w.center, y) <= w.radius;
    case Window::Kind::Product:
      for (std::size_t i = 0; i < w.parts.size(); ++i) {
        const auto& f = model.factors()[i];
        if (!window_contains(f, w.parts[i], y.segment(model.factor_offset(i), f.chart_dim()))) return false;
      }
      return true;
  }
  return false;
}

struct QuadratureGrid {
  Eigen::MatrixXd nodes;     // chart coordinates, one node per column
  Eigen::VectorXd weights;   // volume weights, strictly positive
  Window window;
  double resolution = 0.0;

  Eigen::Index size() const { return weights.size(); }
  double total_weight() const { return weights.sum(); }

  template <class F>
  double integrate(F&& f) const {
    std::vector<double> terms(static_cast<std::size_t>(size()));
    for (Eigen::Index i = 0; i < size(); ++i) terms[i] = weights[i] * f(nodes.col(i));
    return pairwise_sum(terms);
  }
};

namespace detail {

inline void panel_rule(double a, double b, double h, int order, std::vector<double>& x, std::vector<double>& w) {
  const int cells = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-12)));
  std::vector<double> edges(cells + 1);
  for (int i = 0; i <= cells; ++i) edges[i] = a + (b - a) * i / cells;
  if (order == 1) {
    x.clear();
    w.clear();
    for (int i = 0; i < cells; ++i) {
      x.push_back(0.5 * (edges[i] + edges[i + 1]));
      w.push_back(edges[i + 1] - edges[i]);
    }
    return;
  }
  panel_nodes(edges, order, x, w);
}

inline QuadratureGrid tensor(const std::vector<std::vector<double>>& xs, const std::vector<std::vector<double>>& ws) {
  QuadratureGrid g;
  const int d = static_cast<int>(xs.size());
  Eigen::Index n = 1;
  for (const auto& x : xs) n *= static_cast<Eigen::Index>(x.size());
  g.nodes.resize(d, n);
  g.weights.resize(n);
  std::vector<std::size_t> idx(d, 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    double w = 1.0;
    for (int j = 0; j < d; ++j) {
      g.nodes(j, k) = xs[j][idx[j]];
      w *= ws[j][idx[j]];
    }
    g.weights[k] = w;
    for (int j = d - 1; j >= 0; --j) {
      if (++idx[j] < xs[j].size()) break;
      idx[j] = 0;
    }
  }
  return g;
}

// Directions on S^{m-1} with weights summing to its area.
inline void unit_directions(int m, double angular_h, Eigen::MatrixXd& dirs, std::vector<double>& w) {
  if (m == 1) {
    dirs.resize(1, 2);
    dirs << 1.0, -1.0;
    w = {1.0, 1.0};
    return;
  }
  if (m == 2) {
    const int n = std::max(8, static_cast<int>(std::ceil(2.0 * kPi / angular_h)));
    dirs.resize(2, n);
    w.assign(n, 2.0 * kPi / n);
    for (int i = 0; i < n; ++i) {
      const double phi = 2.0 * kPi * (i + 0.5) / n;
      dirs(0, i) = std::cos(phi);
      dirs(1, i) = std::sin(phi);
    }
    return;
  }
  if (m == 3) {
    const int nt = std::max(4, std::min(kMaxGaussOrder, static_cast<int>(std::ceil(kPi / angular_h))));
    const int np = 2 * nt;
    const GaussRule& rule = gauss_legendre(nt);
    dirs.resize(3, nt * np);
    w.assign(nt * np, 0.0);
    int k = 0;
    for (int i = 0; i < nt; ++i) {
      const double z = rule.nodes[i];
      const double s = std::sqrt(1.0 - z * z);
      for (int j = 0; j < np; ++j, ++k) {
        const double phi = 2.0 * kPi * (j + 0.5) / np;
        dirs(0, k) = s * std::cos(phi);
        dirs(1, k) = s * std::sin(phi);
        dirs(2, k) = z;
        w[k] = rule.weights[i] * 2.0 * kPi / np;
      }
    }
    return;
  }
  throw UnsupportedModel("polar grids are available up to dimension 3");
}

inline QuadratureGrid full_grid(const Manifold& model, double h, int order) {
  switch (model.kind()) {
    case ModelKind::Circle:
    case ModelKind::Torus: {
      const double L = model.side();
      const int n = std::max(4, static_cast<int>(std::ceil(L / h - 1e-12)));
      std::vector<double> x(n), w(n, L / n);
      for (int i = 0; i < n; ++i) x[i] = L * i / n;
      return tensor(std::vector<std::vector<double>>(model.dim(), x), std::vector<std::vector<double>>(model.dim(), w));
    }
    case ModelKind::Sphere2: {
      Eigen::MatrixXd dirs;
      std::vector<double> w;
      const int nt = std::max(4, static_cast<int>(std::ceil(kPi / h)));
      // Gauss-Legendre in z beyond the tabulated orders falls back to panels.
      if (nt <= kMaxGaussOrder) {
        unit_directions(3, h, dirs, w);
      } else {
        std::vector<double> z, wz;
        panel_rule(-1.0, 1.0, 2.0 * h / kPi * 8, 8, z, wz);
        const int np = 2 * nt;
        dirs.resize(3, static_cast<Eigen::Index>(z.size()) * np);
        int k = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double s = std::sqrt(1.0 - z[i] * z[i]);
          for (int j = 0; j < np; ++j, ++k) {
            const double phi = 2.0 * kPi * (j + 0.5) / np;
            dirs.col(k) << s * std::cos(phi), s * std::sin(phi), z[i];
            w.push_back(wz[i] * 2.0 * kPi / np);
          }
        }
      }
      QuadratureGrid g;
      g.nodes = dirs;
      g.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      return g;
    }
    default:
      (void)order;
      throw DomainError("model " + model.spec() + " is not compact; a box or ball window is required");
  }
}

inline QuadratureGrid ball_grid(const Manifold& model, PointRef c, double R, double h, int order) {
  if (!model.isotropic() && !(model.kind() == ModelKind::Torus && R <= 0.5 * model.side()))
    throw UnsupportedModel("ball windows need an isotropic model (or a torus ball inside the fundamental cell)");
  validate_point(model, c);
  const int m = model.dim();
  const double r_max = std::min(R, max_radius(model));
  std::vector<double> r, wr;
  panel_rule(0.0, r_max, h, order, r, wr);
  const Eigen::MatrixXd F = tangent_frame(model, c);
  std::vector<Eigen::VectorXd> cols;
  std::vector<double> weights;
  for (std::size_t i = 0; i < r.size(); ++i) {
    Eigen::MatrixXd dirs;
    std::vector<double> wd;
    unit_directions(m, h / std::max(warp(model, r[i]), h), dirs, wd);
    const double area = std::pow(warp(model, r[i]), m - 1);
    for (Eigen::Index k = 0; k < dirs.cols(); ++k) {
      const Eigen::VectorXd v = r[i] * (F * dirs.col(k));
      cols.push_back(detail::exp_map_unchecked(model, c, v));
      weights.push_back(wr[i] * area * wd[k]);
    }
  }
  QuadratureGrid g;
  g.nodes.resize(model.chart_dim(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) g.nodes.col(static_cast<Eigen::Index>(k)) = cols[k];
  g.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return g;
}

}  // namespace detail

/// Grid with sum_i w_i f(x_i) ~ int_window f dmu.  order is the Gauss-Legendre order per cell
/// along non-periodic directions (1 gives the midpoint rule).
inline QuadratureGrid build_grid(const Manifold& model, double h, const Window& window = Window::full(), int order = 3) {
  if (!(h > 0)) throw DomainError("build_grid: resolution must be positive");
  QuadratureGrid g;
  switch (window.kind) {
    case Window::Kind::Full:
      if (model.kind() == ModelKind::Product) {
        std::vector<Window> parts(model.factors().size(), Window::full());
        return build_grid(model, h, Window::product(parts), order);
      }
      g = detail::full_grid(model, h, order);
      break;
    case Window::Kind::Box: {
      if (window.lo.size() != model.chart_dim() || window.hi.size() != model.chart_dim())
        throw DimensionMismatch("box window has wrong dimension");
      if (((window.hi - window.lo).array() <= 0).any()) throw EmptyWindow("box window is empty");
      if (model.kind() != ModelKind::Euclidean && model.kind() != ModelKind::Torus &&
          model.kind() != ModelKind::Circle && model.kind() != ModelKind::Hyperbolic3)
        throw UnsupportedModel("box windows are defined on flat charts and the hyperbolic chart");
      if (model.kind() == ModelKind::Hyperbolic3 && !(window.lo[2] > 0)) throw DomainError("hyperbolic box must have z > 0");
      std::vector<std::vector<double>> xs(model.chart_dim()), ws(model.chart_dim());
      for (int j = 0; j < model.chart_dim(); ++j) detail::panel_rule(window.lo[j], window.hi[j], h, order, xs[j], ws[j]);
      g = detail::tensor(xs, ws);
      if (model.kind() == ModelKind::Hyperbolic3)
        for (Eigen::Index k = 0; k < g.size(); ++k) g.weights[k] /= std::pow(g.nodes(2, k), 3);
      if (model.kind() == ModelKind::Torus || model.kind() == ModelKind::Circle)
        for (Eigen::Index k = 0; k < g.size(); ++k)
          for (int j = 0; j < model.chart_dim(); ++j) g.nodes(j, k) = detail::wrap(g.nodes(j, k), model.side());
      break;
    }
    case Window::Kind::Ball:
      if (!(window.radius > 0)) throw EmptyWindow("ball window has nonpositive radius");
      g = detail::ball_grid(model, window.center, window.radius, h, order);
      break;
    case Window::Kind::Product: {
      if (model.kind() != ModelKind::Product || window.parts.size() != model.factors().size())
        throw DimensionMismatch("product window must have one part per factor");
      std::vector<QuadratureGrid> fg;
      for (std::size_t i = 0; i < window.parts.size(); ++i) fg.push_back(build_grid(model.factors()[i], h, window.parts[i], order));
      Eigen::Index n = 1;
      for (const auto& f : fg) n *= f.size();
      g.nodes.resize(model.chart_dim(), n);
      g.weights.resize(n);
      std::vector<Eigen::Index> idx(fg.size(), 0);
      for (Eigen::Index k = 0; k < n; ++k) {
        double w = 1.0;
        for (std::size_t j = 0; j < fg.size(); ++j) {
          const auto& f = model.factors()[j];
          g.nodes.block(model.factor_offset(j), k, f.chart_dim(), 1) = fg[j].nodes.col(idx[j]);
          w *= fg[j].weights[idx[j]];
        }
        g.weights[k] = w;
        for (int j = static_cast<int>(fg.size()) - 1; j >= 0; --j) {
          if (++idx[j] < fg[j].size()) break;
          idx[j] = 0;
        }
      }
      break;
    }
  }
  if (g.size() == 0) throw EmptyWindow("grid has no nodes");
  g.window = window;
  g.resolution = h;
  return g;
}

}  // namespace katokit
