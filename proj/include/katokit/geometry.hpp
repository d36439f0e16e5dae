#pragma once

// Model manifolds: Euclidean spaces, flat tori, the unit circle, the unit 2-sphere,
// hyperbolic 3-space and Riemannian products of these.
//
// Chart conventions:
//   Euclidean(m), Torus(m, L)  plain coordinates (torus coordinates taken mod L)
//   Circle                     the angle theta (mod 2 pi)
//   Sphere2                    unit vector in R^3
//   Hyperbolic3                upper half-space (x1, x2, z) with z > 0, metric |dx|^2 / z^2
//   Product                    concatenation of the factor charts

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace katokit {

using Point = Eigen::VectorXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;

enum class ModelKind { Euclidean, Torus, Circle, Sphere2, Hyperbolic3, Product };

class Manifold {
 public:
  static Manifold euclidean(int m) {
    if (m < 1) throw DomainError("euclidean: dimension must be positive");
    return Manifold(ModelKind::Euclidean, m, 0.0);
  }
  static Manifold torus(int m, double side = 2.0 * kPi) {
    if (m < 1) throw DomainError("torus: dimension must be positive");
    if (!(side > 0) || !std::isfinite(side)) throw DomainError("torus: side length must be positive");
    return Manifold(ModelKind::Torus, m, side);
  }
  static Manifold circle() { return Manifold(ModelKind::Circle, 1, 2.0 * kPi); }
  static Manifold sphere2() { return Manifold(ModelKind::Sphere2, 2, 0.0); }
  static Manifold hyperbolic3() { return Manifold(ModelKind::Hyperbolic3, 3, 0.0); }
  static Manifold product(std::vector<Manifold> factors) {
    if (factors.size() < 2) throw DomainError("product: need at least two factors");
    Manifold out(ModelKind::Product, 0, 0.0);
    // Flatten nested products so factor indices refer to the irreducible pieces.
    for (auto& f : factors) {
      if (f.kind_ == ModelKind::Product)
        for (auto& g : f.factors_) out.factors_.push_back(g);
      else
        out.factors_.push_back(std::move(f));
    }
    for (const auto& f : out.factors_) {
      out.offsets_.push_back(out.chart_dim_);
      out.dim_ += f.dim_;
      out.chart_dim_ += f.chart_dim_;
    }
    return out;
  }

  ModelKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int chart_dim() const { return chart_dim_; }
  double side() const { return side_; }

  double ricci_lower_bound() const {
    switch (kind_) {
      case ModelKind::Hyperbolic3:
        return -2.0;
      case ModelKind::Product: {
        double k = 0.0;
        for (const auto& f : factors_) k = std::min(k, f.ricci_lower_bound());
        return k;
      }
      default:
        return 0.0;
    }
  }
  bool geodesically_complete() const { return true; }
  bool stochastically_complete() const { return true; }

  bool compact() const {
    switch (kind_) {
      case ModelKind::Torus:
      case ModelKind::Circle:
      case ModelKind::Sphere2:
        return true;
      case ModelKind::Product:
        return std::all_of(factors_.begin(), factors_.end(), [](const Manifold& f) { return f.compact(); });
      default:
        return false;
    }
  }

  // Models whose kernel depends on the distance only and whose volume measure in geodesic
  // polar coordinates around any point is A(r) dr dsigma.
  bool isotropic() const {
    switch (kind_) {
      case ModelKind::Euclidean:
      case ModelKind::Circle:
      case ModelKind::Sphere2:
      case ModelKind::Hyperbolic3:
        return true;
      default:
        return false;
    }
  }

  // Largest r such that the ball of radius r is a geodesic polar cap.
  double injectivity_radius() const {
    switch (kind_) {
      case ModelKind::Torus:
        return 0.5 * side_;
      case ModelKind::Circle:
      case ModelKind::Sphere2:
        return kPi;
      case ModelKind::Product: {
        double r = kInf;
        for (const auto& f : factors_) r = std::min(r, f.injectivity_radius());
        return r;
      }
      default:
        return kInf;
    }
  }

  double total_volume() const {
    switch (kind_) {
      case ModelKind::Torus:
        return std::pow(side_, dim_);
      case ModelKind::Circle:
        return 2.0 * kPi;
      case ModelKind::Sphere2:
        return 4.0 * kPi;
      case ModelKind::Product: {
        double v = 1.0;
        for (const auto& f : factors_) v *= f.total_volume();
        return v;
      }
      default:
        return kInf;
    }
  }

  const std::vector<Manifold>& factors() const { return factors_; }
  int factor_offset(std::size_t i) const { return offsets_.at(i); }

  std::string spec() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case ModelKind::Euclidean:
        os << "euclidean:" << dim_;
        break;
      case ModelKind::Torus:
        os << "torus:" << dim_ << ":" << side_;
        break;
      case ModelKind::Circle:
        os << "circle";
        break;
      case ModelKind::Sphere2:
        os << "sphere2";
        break;
      case ModelKind::Hyperbolic3:
        os << "hyperbolic3";
        break;
      case ModelKind::Product:
        os << "product(";
        for (std::size_t i = 0; i < factors_.size(); ++i) os << (i ? "," : "") << factors_[i].spec();
        os << ")";
        break;
    }
    return os.str();
  }

  bool operator==(const Manifold& o) const {
    if (kind_ != o.kind_ || dim_ != o.dim_ || side_ != o.side_ || factors_.size() != o.factors_.size()) return false;
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (!(factors_[i] == o.factors_[i])) return false;
    return true;
  }

 private:
  Manifold(ModelKind kind, int dim, double side)
      : kind_(kind), dim_(dim), chart_dim_(kind == ModelKind::Sphere2 ? 3 : dim), side_(side) {}

  ModelKind kind_;
  int dim_;
  int chart_dim_;
  double side_;
  std::vector<Manifold> factors_;
  std::vector<int> offsets_;
};

/// Surface area of the unit sphere S^{m-1} in R^m.
inline double unit_sphere_area(int m) {
  return 2.0 * std::pow(kPi, 0.5 * m) / std::tgamma(0.5 * m);
}

/// Volume of the Euclidean unit ball in R^m.
inline double unit_ball_volume(int m) { return unit_sphere_area(m) / m; }

inline void validate_point(const Manifold& model, PointRef x) {
  if (x.size() != model.chart_dim())
    throw DimensionMismatch("point has " + std::to_string(x.size()) + " coordinates, model " + model.spec() +
                            " expects " + std::to_string(model.chart_dim()));
  if (!x.allFinite()) throw InvalidPoint("point has non-finite coordinates");
  switch (model.kind()) {
    case ModelKind::Sphere2:
      if (std::abs(x.norm() - 1.0) > 1e-9) throw InvalidPoint("sphere point must have unit norm");
      break;
    case ModelKind::Hyperbolic3:
      if (!(x[2] > 0)) throw InvalidPoint("hyperbolic point must have positive height");
      break;
    case ModelKind::Product:
      for (std::size_t i = 0; i < model.factors().size(); ++i) {
        const auto& f = model.factors()[i];
        validate_point(f, x.segment(model.factor_offset(i), f.chart_dim()));
      }
      break;
    default:
      break;
  }
}

namespace detail {

// Minimal-image difference on a circle of length L.
inline double periodic_delta(double a, double b, double L) {
  const double d = std::fmod(std::abs(a - b), L);
  return std::min(d, L - d);
}

inline double wrap(double a, double L) {
  double r = std::fmod(a, L);
  if (r < 0) r += L;
  if (r >= L) r = 0.0;
  return r;
}

inline double distance_unchecked(const Manifold& model, PointRef x, PointRef y) {
  switch (model.kind()) {
    case ModelKind::Euclidean:
      return (x - y).norm();
    case ModelKind::Torus: {
      double s = 0.0;
      for (int i = 0; i < x.size(); ++i) {
        const double d = periodic_delta(x[i], y[i], model.side());
        s += d * d;
      }
      return std::sqrt(s);
    }
    case ModelKind::Circle:
      return periodic_delta(x[0], y[0], 2.0 * kPi);
    case ModelKind::Sphere2: {
      const Eigen::Vector3d a = x.head<3>().normalized();
      const Eigen::Vector3d b = y.head<3>().normalized();
      return std::atan2(a.cross(b).norm(), a.dot(b));
    }
    case ModelKind::Hyperbolic3: {
      const double chord = (x - y).norm();
      return 2.0 * std::asinh(chord / (2.0 * std::sqrt(x[2] * y[2])));
    }
    case ModelKind::Product: {
      double s = 0.0;
      for (std::size_t i = 0; i < model.factors().size(); ++i) {
        const auto& f = model.factors()[i];
        const int off = model.factor_offset(i);
        const double d = distance_unchecked(f, x.segment(off, f.chart_dim()), y.segment(off, f.chart_dim()));
        s += d * d;
      }
      return std::sqrt(s);
    }
  }
  return 0.0;
}

}  // namespace detail

inline double distance(const Manifold& model, PointRef x, PointRef y) {
  validate_point(model, x);
  validate_point(model, y);
  return detail::distance_unchecked(model, x, y);
}

/// Distances to each factor, in factor order (a single entry for irreducible models).
inline std::vector<double> factor_distances(const Manifold& model, PointRef x, PointRef y) {
  if (model.kind() != ModelKind::Product) return {distance(model, x, y)};
  std::vector<double> out;
  for (std::size_t i = 0; i < model.factors().size(); ++i) {
    const auto& f = model.factors()[i];
    const int off = model.factor_offset(i);
    out.push_back(distance(f, x.segment(off, f.chart_dim()), y.segment(off, f.chart_dim())));
  }
  return out;
}

/// S(r) with geodesic spheres of an isotropic model having area unit_sphere_area(m) S(r)^{m-1}.
inline double warp(const Manifold& model, double r) {
  switch (model.kind()) {
    case ModelKind::Sphere2:
      return std::sin(r);
    case ModelKind::Hyperbolic3:
      return std::sinh(r);
    default:
      return r;
  }
}

/// Largest distance from a point (the diameter for compact isotropic models).
inline double max_radius(const Manifold& model) {
  switch (model.kind()) {
    case ModelKind::Circle:
    case ModelKind::Sphere2:
      return kPi;
    case ModelKind::Torus:
      return 0.5 * model.side() * std::sqrt(static_cast<double>(model.dim()));
    case ModelKind::Product: {
      double s = 0.0;
      for (const auto& f : model.factors()) s += std::pow(max_radius(f), 2);
      return std::sqrt(s);
    }
    default:
      return kInf;
  }
}

inline double ball_volume(const Manifold& model, PointRef x, double r);
inline double sphere_area(const Manifold& model, double r);

namespace detail {

// Volume of {y in [-L/2, L/2]^m : |y| <= r}.
inline double torus_ball_volume(int m, double L, double r) {
  const double half = 0.5 * L;
  if (r <= 0) return 0.0;
  if (m == 1) return 2.0 * std::min(r, half);
  if (r <= half) return unit_ball_volume(m) * std::pow(r, m);
  if (r >= half * std::sqrt(static_cast<double>(m))) return std::pow(L, m);
  const double s_max = std::min(r, half);
  auto slice = [&](double s) { return torus_ball_volume(m - 1, L, std::sqrt(std::max(0.0, r * r - s * s))); };
  std::vector<double> br{0.0};
  for (int k = 1; k < m; ++k) {
    const double kink = r * r - k * half * half;
    if (kink > 0 && std::sqrt(kink) < s_max) br.push_back(std::sqrt(kink));
  }
  br.push_back(s_max);
  std::sort(br.begin(), br.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i)
    total += integrate_adaptive(slice, br[i], br[i + 1], 1e-14, 1e-13).value;
  return 2.0 * total;
}

inline double model_ball_volume(const Manifold& model, double r) {
  switch (model.kind()) {
    case ModelKind::Euclidean:
      return unit_ball_volume(model.dim()) * std::pow(r, model.dim());
    case ModelKind::Torus:
      return torus_ball_volume(model.dim(), model.side(), r);
    case ModelKind::Circle:
      return 2.0 * std::min(r, kPi);
    case ModelKind::Sphere2:
      return r >= kPi ? 4.0 * kPi : 2.0 * kPi * (1.0 - std::cos(r));
    case ModelKind::Hyperbolic3:
      // 2 pi (sinh r cosh r - r), evaluated via a series for small r.
      if (r < 1e-3) {
        const double r3 = r * r * r;
        return 4.0 * kPi / 3.0 * r3 * (1.0 + 0.4 * r * r);
      }
      return kPi * (std::sinh(2.0 * r) - 2.0 * r);
    case ModelKind::Product:
      break;
  }
  // Product: V(r) = int V_a(sqrt(r^2 - s^2)) A_b(s) ds over the distance s in the remaining factors.
  const auto& fs = model.factors();
  const Manifold& a = fs.front();
  const Manifold b = fs.size() == 2 ? fs[1] : Manifold::product({fs.begin() + 1, fs.end()});
  const double s_hi = std::min(r, max_radius(b));
  auto integrand = [&](double s) {
    return model_ball_volume(a, std::sqrt(std::max(0.0, r * r - s * s))) * sphere_area(b, s);
  };
  std::vector<double> br{0.0, s_hi};
  if (a.compact()) {
    const double k = r * r - std::pow(max_radius(a), 2);
    if (k > 0 && std::sqrt(k) < s_hi) br.insert(br.begin() + 1, std::sqrt(k));
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i)
    total += integrate_adaptive(integrand, br[i], br[i + 1], 1e-13, 1e-11).value;
  return total;
}

}  // namespace detail

inline double ball_volume(const Manifold& model, PointRef x, double r) {
  validate_point(model, x);
  if (!(r > 0)) throw DomainError("ball_volume: radius must be positive");
  return detail::model_ball_volume(model, r);
}

/// Area of the geodesic sphere of radius r (derivative of the ball volume) for isotropic models.
inline double sphere_area(const Manifold& model, double r) {
  switch (model.kind()) {
    case ModelKind::Euclidean:
      return unit_sphere_area(model.dim()) * std::pow(r, model.dim() - 1);
    case ModelKind::Circle:
      return r < kPi ? 2.0 : 0.0;
    case ModelKind::Sphere2:
      return r < kPi ? 2.0 * kPi * std::sin(r) : 0.0;
    case ModelKind::Hyperbolic3: {
      const double s = std::sinh(r);
      return 4.0 * kPi * s * s;
    }
    default: {
      const double h = 1e-6 * std::max(r, 1e-3);
      const double lo = std::max(0.0, r - h);
      return (detail::model_ball_volume(model, r + h) - detail::model_ball_volume(model, lo)) / (r + h - lo);
    }
  }
}

/// Canonical base point of the model.
inline Point origin(const Manifold& model) {
  switch (model.kind()) {
    case ModelKind::Sphere2:
      return Eigen::Vector3d(0, 0, 1);
    case ModelKind::Hyperbolic3:
      return Eigen::Vector3d(0, 0, 1);
    case ModelKind::Product: {
      Point p(model.chart_dim());
      for (std::size_t i = 0; i < model.factors().size(); ++i) {
        const auto& f = model.factors()[i];
        p.segment(model.factor_offset(i), f.chart_dim()) = origin(f);
      }
      return p;
    }
    default:
      return Point::Zero(model.chart_dim());
  }
}

namespace detail {

struct Hyperboloid {
  Eigen::Vector4d X;
  Eigen::Matrix<double, 4, 3> J;  // derivative of the embedding w.r.t. (x1, x2, z)
};

inline Hyperboloid to_hyperboloid(PointRef p) {
  const double x1 = p[0], x2 = p[1], z = p[2];
  const double r2 = x1 * x1 + x2 * x2;
  Hyperboloid h;
  h.X << (1.0 + r2 + z * z) / (2.0 * z), x1 / z, x2 / z, (1.0 - r2 - z * z) / (2.0 * z);
  const double z2 = z * z;
  h.J << x1 / z, x2 / z, (z2 - 1.0 - r2) / (2.0 * z2),  //
      1.0 / z, 0.0, -x1 / z2,                            //
      0.0, 1.0 / z, -x2 / z2,                            //
      -x1 / z, -x2 / z, (r2 - z2 - 1.0) / (2.0 * z2);
  return h;
}

inline double minkowski(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

inline Point from_hyperboloid(const Eigen::Vector4d& X) {
  const double z = 1.0 / (X[0] + X[3]);
  return Eigen::Vector3d(X[1] * z, X[2] * z, z);
}

inline Point exp_map_unchecked(const Manifold& model, PointRef x, PointRef v) {
  switch (model.kind()) {
    case ModelKind::Euclidean:
      return x + v;
    case ModelKind::Torus: {
      Point y = x + v;
      for (int i = 0; i < y.size(); ++i) y[i] = wrap(y[i], model.side());
      return y;
    }
    case ModelKind::Circle:
      return Point::Constant(1, wrap(x[0] + v[0], 2.0 * kPi));
    case ModelKind::Sphere2: {
      const Eigen::Vector3d p = x.head<3>();
      Eigen::Vector3d t = v.head<3>() - v.head<3>().dot(p) * p;
      const double n = t.norm();
      if (n == 0.0) return p;
      Eigen::Vector3d y = std::cos(n) * p + std::sin(n) * (t / n);
      return y.normalized();
    }
    case ModelKind::Hyperbolic3: {
      const Hyperboloid h = to_hyperboloid(x);
      const Eigen::Vector4d V = h.J * v.head<3>();
      const double n = std::sqrt(std::max(0.0, minkowski(V, V)));
      if (n == 0.0) return x;
      Eigen::Vector4d Y = std::cosh(n) * h.X + (std::sinh(n) / n) * V;
      // Project back onto the upper sheet of the hyperboloid.
      const double spatial = Y.tail<3>().norm();
      Y[0] = std::sqrt(1.0 + spatial * spatial);
      Point y = from_hyperboloid(Y);
      if (!(y[2] > 0) || !std::isfinite(y[2])) y[2] = std::max(y[2], std::numeric_limits<double>::min());
      return y;
    }
    case ModelKind::Product: {
      Point y(x.size());
      for (std::size_t i = 0; i < model.factors().size(); ++i) {
        const auto& f = model.factors()[i];
        const int off = model.factor_offset(i);
        y.segment(off, f.chart_dim()) =
            exp_map_unchecked(f, x.segment(off, f.chart_dim()), v.segment(off, f.chart_dim()));
      }
      return y;
    }
  }
  return x;
}

}  // namespace detail

/// Point at unit time along the geodesic from x with initial velocity v (chart components).
inline Point exp_map(const Manifold& model, PointRef x, PointRef v) {
  validate_point(model, x);
  if (v.size() != model.chart_dim()) throw DimensionMismatch("exp_map: tangent vector has wrong size");
  if (!v.allFinite()) throw DomainError("exp_map: tangent vector must be finite");
  return detail::exp_map_unchecked(model, x, v);
}

/// Riemannian norm of a chart tangent vector at x.
inline double tangent_norm(const Manifold& model, PointRef x, PointRef v) {
  switch (model.kind()) {
    case ModelKind::Sphere2: {
      const Eigen::Vector3d p = x.head<3>();
      return (v.head<3>() - v.head<3>().dot(p) * p).norm();
    }
    case ModelKind::Hyperbolic3:
      return v.norm() / x[2];
    case ModelKind::Product: {
      double s = 0.0;
      for (std::size_t i = 0; i < model.factors().size(); ++i) {
        const auto& f = model.factors()[i];
        const int off = model.factor_offset(i);
        s += std::pow(tangent_norm(f, x.segment(off, f.chart_dim()), v.segment(off, f.chart_dim())), 2);
      }
      return std::sqrt(s);
    }
    default:
      return v.norm();
  }
}

/// Orthonormal tangent frame at x, one chart vector per column (dim() columns).
inline Eigen::MatrixXd tangent_frame(const Manifold& model, PointRef x) {
  const int n = model.chart_dim();
  switch (model.kind()) {
    case ModelKind::Sphere2: {
      const Eigen::Vector3d p = x.head<3>();
      Eigen::Vector3d a = std::abs(p[0]) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
      Eigen::Vector3d e1 = (a - a.dot(p) * p).normalized();
      Eigen::Vector3d e2 = p.cross(e1);
      Eigen::MatrixXd F(3, 2);
      F.col(0) = e1;
      F.col(1) = e2;
      return F;
    }
    case ModelKind::Hyperbolic3:
      return Eigen::MatrixXd::Identity(3, 3) * x[2];
    case ModelKind::Product: {
      Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, model.dim());
      int col = 0;
      for (std::size_t i = 0; i < model.factors().size(); ++i) {
        const auto& f = model.factors()[i];
        const int off = model.factor_offset(i);
        F.block(off, col, f.chart_dim(), f.dim()) = tangent_frame(f, x.segment(off, f.chart_dim()));
        col += f.dim();
      }
      return F;
    }
    default:
      return Eigen::MatrixXd::Identity(n, n);
  }
}

/// Tangent vector with N(0, variance * g^{-1}) law at x.
template <class Rng>
Point gaussian_tangent(const Manifold& model, PointRef x, double variance, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd F = tangent_frame(model, x);
  Eigen::VectorXd xi(model.dim());
  for (int i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
  return std::sqrt(variance) * (F * xi);
}

/// Point at geodesic distance r from x along the first frame direction.
inline Point point_at_distance(const Manifold& model, PointRef x, double r) {
  const Eigen::MatrixXd F = tangent_frame(model, x);
  return exp_map(model, x, r * F.col(0));
}

/// Distance between two points at distances r and rho from a common center, separated by
/// the angle theta there.  Uses a half-angle form that stays accurate for tiny distances.
inline double axial_distance(const Manifold& model, double r, double rho, double theta) {
  const double s = std::sin(0.5 * theta);
  switch (model.kind()) {
    case ModelKind::Circle:
    case ModelKind::Torus:
    case ModelKind::Euclidean:
      if (model.dim() == 1 || model.kind() == ModelKind::Circle) {
        double d = theta < 0.5 * kPi ? std::abs(r - rho) : r + rho;
        if (model.kind() == ModelKind::Circle) d = std::min(d, 2.0 * kPi - d);
        return d;
      } else {
        const double h = 0.25 * (r - rho) * (r - rho) + r * rho * s * s;
        return 2.0 * std::sqrt(std::max(0.0, h));
      }
    case ModelKind::Sphere2: {
      const double a = std::sin(0.5 * (r - rho));
      const double h = a * a + std::sin(r) * std::sin(rho) * s * s;
      return 2.0 * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
    }
    case ModelKind::Hyperbolic3: {
      const double a = std::sinh(0.5 * (r - rho));
      const double h = a * a + std::sinh(r) * std::sinh(rho) * s * s;
      return 2.0 * std::asinh(std::sqrt(std::max(0.0, h)));
    }
    default:
      throw UnsupportedModel("axial_distance: model is not isotropic");
  }
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_top_level(std::string_view s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DomainError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw DomainError("not a number: '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s) {
  const double v = parse_double(s);
  if (v != std::floor(v)) throw DomainError("not an integer: '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses "euclidean:3", "torus:2:6.2832", "circle", "sphere2", "hyperbolic3",
/// "product(a,b,...)".
inline Manifold parse_manifold(std::string_view text) {
  const std::string s = detail::trim(text);
  if (s.rfind("product(", 0) == 0) {
    if (s.back() != ')') throw DomainError("product spec must end with ')'");
    std::vector<Manifold> factors;
    for (const auto& part : detail::split_top_level(std::string_view(s).substr(8, s.size() - 9), ','))
      factors.push_back(parse_manifold(part));
    return Manifold::product(std::move(factors));
  }
  const auto parts = detail::split_top_level(s, ':');
  const std::string& name = parts[0];
  if (name == "circle" && parts.size() == 1) return Manifold::circle();
  if (name == "sphere2" && parts.size() == 1) return Manifold::sphere2();
  if (name == "hyperbolic3" && parts.size() == 1) return Manifold::hyperbolic3();
  if (name == "euclidean" && parts.size() == 2) return Manifold::euclidean(detail::parse_int(parts[1]));
  if (name == "torus" && (parts.size() == 2 || parts.size() == 3))
    return Manifold::torus(detail::parse_int(parts[1]), parts.size() == 3 ? detail::parse_double(parts[2]) : 2.0 * kPi);
  throw DomainError("unknown manifold spec '" + s + "'");
}

}  // namespace katokit
