#pragma once

// Faber-Krahn control pairs: Dirichlet ground energies of -(1/2)Delta on balls and boxes by
// Shortley-Weller finite differences, the heat bound sup_y p(t,x,y) <= C a^{-m/2} min(t,R^2)^{-m/2}
// and the Kato control pair it induces.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "heat_kernel.hpp"
#include "json.hpp"
#include "kato.hpp"

namespace katokit {

/// Open test set: a ball or an axis-aligned box in Euclidean space.
struct TestSet {
  enum class Kind { Ball, Box } kind = Kind::Ball;
  Point center;     // ball
  double radius = 0;
  Eigen::VectorXd lo, hi;  // box

  static TestSet ball(Point c, double r) { return {Kind::Ball, std::move(c), r, {}, {}}; }
  static TestSet box(Eigen::VectorXd lo, Eigen::VectorXd hi) { return {Kind::Box, {}, 0.0, std::move(lo), std::move(hi)}; }

  int dim() const { return kind == Kind::Ball ? static_cast<int>(center.size()) : static_cast<int>(lo.size()); }

  double volume() const {
    if (kind == Kind::Ball) return unit_ball_volume(dim()) * std::pow(radius, dim());
    return (hi - lo).prod();
  }

  // Largest distance from x to a point of the closure.
  double reach_from(PointRef x) const {
    if (kind == Kind::Ball) return (center - x).norm() + radius;
    Eigen::VectorXd far(lo.size());
    for (int i = 0; i < lo.size(); ++i) far[i] = std::max(std::abs(lo[i] - x[i]), std::abs(hi[i] - x[i]));
    return far.norm();
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(6);
    if (kind == Kind::Ball) {
      os << "ball(r=" << radius << ")";
    } else {
      os << "box(";
      for (int i = 0; i < lo.size(); ++i) os << (i ? "x" : "") << hi[i] - lo[i];
      os << ")";
    }
    return os.str();
  }
};

struct DirichletEigenvalue {
  double coarse = 0.0;      // spacing h
  double fine = 0.0;        // spacing h/2
  double richardson = 0.0;  // (4 fine - coarse) / 3
  double tolerance = 0.0;   // |richardson - fine|
  long unknowns = 0;
  bool converged = true;    // |coarse - fine| / fine < 5%
};

namespace detail {

// Smallest eigenvalue of -(1/2)Delta_h with Dirichlet data on U, Shortley-Weller at curved
// boundaries, by inverse iteration on a sparse LU factorization.
inline double dirichlet_fd(const TestSet& U, double h, long* unknowns = nullptr) {
  const int m = U.dim();
  if (m < 1 || m > 3) throw UnsupportedModel("Dirichlet eigenvalues are implemented for m <= 3");
  Eigen::VectorXd origin_pt(m), step(m);
  Eigen::VectorXi count(m);
  if (U.kind == TestSet::Kind::Box) {
    for (int j = 0; j < m; ++j) {
      const double L = U.hi[j] - U.lo[j];
      if (!(L > 0)) throw EmptyWindow("empty box test set");
      const int n = std::max(2, static_cast<int>(std::lround(L / h)));
      step[j] = L / n;
      count[j] = n - 1;  // interior nodes
      origin_pt[j] = U.lo[j] + step[j];
    }
  } else {
    if (!(U.radius > 0)) throw EmptyWindow("empty ball test set");
    const int n = static_cast<int>(std::floor(U.radius / h - 1e-12));
    for (int j = 0; j < m; ++j) {
      step[j] = h;
      count[j] = 2 * n + 1;
      origin_pt[j] = U.center[j] - n * h;
    }
  }
  long total = 1;
  for (int j = 0; j < m; ++j) total *= count[j];
  auto coord = [&](long idx, Eigen::VectorXi& ijk) {
    for (int j = 0; j < m; ++j) {
      ijk[j] = static_cast<int>(idx % count[j]);
      idx /= count[j];
    }
  };
  auto position = [&](const Eigen::VectorXi& ijk) {
    Eigen::VectorXd p(m);
    for (int j = 0; j < m; ++j) p[j] = origin_pt[j] + ijk[j] * step[j];
    return p;
  };
  auto inside = [&](const Eigen::VectorXd& p) {
    if (U.kind == TestSet::Kind::Ball) return (p - U.center).squaredNorm() < U.radius * U.radius;
    return ((p.array() > U.lo.array()) && (p.array() < U.hi.array())).all();
  };
  std::vector<long> index(total, -1);
  long n_inside = 0;
  Eigen::VectorXi ijk(m);
  for (long i = 0; i < total; ++i) {
    coord(i, ijk);
    if (inside(position(ijk))) index[i] = n_inside++;
  }
  if (n_inside == 0) throw EmptyWindow("test set contains no grid nodes at this resolution");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n_inside * (2 * m + 1));
  std::vector<long> stride(m, 1);
  for (int j = 1; j < m; ++j) stride[j] = stride[j - 1] * count[j - 1];
  for (long i = 0; i < total; ++i) {
    if (index[i] < 0) continue;
    coord(i, ijk);
    const Eigen::VectorXd p = position(ijk);
    double diag = 0.0;
    for (int j = 0; j < m; ++j) {
      double dist[2];
      long nb[2] = {-1, -1};
      for (int side = 0; side < 2; ++side) {
        const int sgn = side == 0 ? -1 : 1;
        const int k = ijk[j] + sgn;
        dist[side] = step[j];
        if (k >= 0 && k < count[j] && index[i + sgn * stride[j]] >= 0) {
          nb[side] = index[i + sgn * stride[j]];
        } else if (U.kind == TestSet::Kind::Ball) {
          // Distance along the axis to the sphere |p + s e_j - c| = R.
          const Eigen::VectorXd d = p - U.center;
          const double b = d[j];
          const double c = d.squaredNorm() - U.radius * U.radius;
          const double root = std::sqrt(std::max(0.0, b * b - c));
          dist[side] = sgn > 0 ? -b + root : b + root;
          dist[side] = std::clamp(dist[side], 1e-3 * step[j], step[j]);
        }
      }
      // -(1/2) u'' with u = 0 at boundary points.
      const double hl = dist[0], hr = dist[1];
      const double cl = 1.0 / (hl * (hl + hr)), cr = 1.0 / (hr * (hl + hr));
      diag += cl + cr;
      if (nb[0] >= 0) trip.emplace_back(index[i], nb[0], -cl);
      if (nb[1] >= 0) trip.emplace_back(index[i], nb[1], -cr);
    }
    trip.emplace_back(index[i], index[i], diag);
  }
  Eigen::SparseMatrix<double> A(n_inside, n_inside);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) throw Error("Dirichlet operator factorization failed");
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n_inside);
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd y = lu.solve(x);
    const double next = x.dot(x) / x.dot(y);
    x = y / y.norm();
    if (it > 2 && std::abs(next - lambda) <= 1e-13 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  if (unknowns) *unknowns = n_inside;
  return lambda;
}

}  // namespace detail

/// min spec(-(1/2)Delta_U) at spacings h and h/2 with Richardson extrapolation.
inline DirichletEigenvalue dirichlet_eigenvalue(const TestSet& U, double h) {
  DirichletEigenvalue e;
  e.coarse = detail::dirichlet_fd(U, h);
  e.fine = detail::dirichlet_fd(U, 0.5 * h, &e.unknowns);
  e.richardson = (4.0 * e.fine - e.coarse) / 3.0;
  e.tolerance = std::abs(e.richardson - e.fine);
  e.converged = std::abs(e.coarse - e.fine) / e.fine < 0.05;
  return e;
}

/// First Dirichlet eigenvalue of -(1/2)Delta on the unit ball: j^2/2 with j the first zero
/// of J_{m/2-1} (j_{0,1} for m = 2, pi for m = 3).
inline double unit_ball_dirichlet(int m) {
  switch (m) {
    case 1:
      return kPi * kPi / 8.0;
    case 2: {
      const double j01 = 2.404825557695773;
      return 0.5 * j01 * j01;
    }
    case 3:
      return 0.5 * kPi * kPi;
    default:
      throw UnsupportedModel("unit ball eigenvalue tabulated for m <= 3");
  }
}

/// Euclidean Faber-Krahn constant: lambda(U) >= a |U|^{-2/m} with equality on balls.
inline double euclidean_faber_krahn_constant(int m) {
  return unit_ball_dirichlet(m) * std::pow(unit_ball_volume(m), 2.0 / m);
}

struct FaberKrahnControlPair {
  std::function<double(PointRef)> R;
  double R_sup = 1.0;
  double a = 0.0;

  static FaberKrahnControlPair constant(double radius, double a) {
    return {[radius](PointRef) { return radius; }, radius, a};
  }
};

struct FaberKrahnRow {
  std::string set;
  double volume = 0.0;
  DirichletEigenvalue eigen;
  double bound = 0.0;   // a mu(U)^{-2/m}
  double margin = 0.0;  // lambda - bound
};

struct FaberKrahnReport {
  std::vector<FaberKrahnRow> rows;
  double margin_min = kInf;
  double tolerance = 0.0;
  bool conclusive = true;
  bool pass = true;
};

inline nlohmann::json to_json(const FaberKrahnReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"set", row.set}, {"volume", row.volume}, {"lambda", row.eigen.richardson},
                    {"lambda_coarse", row.eigen.coarse}, {"lambda_fine", row.eigen.fine}, {"bound", row.bound},
                    {"margin", row.margin}, {"tolerance", row.eigen.tolerance}});
  return {{"rows", rows}, {"margin_min", json_number(r.margin_min)}, {"tolerance", r.tolerance},
          {"verdict", !r.conclusive ? "INCONCLUSIVE" : (r.pass ? "PASS" : "FAIL")}};
}

/// lambda(U) >= a mu(U)^{-2/m} on each test set U inside B(x, R(x)); PASS iff every margin is
/// at least minus that set's discretization tolerance.
inline FaberKrahnReport faber_krahn_verify(const Manifold& model, const FaberKrahnControlPair& fk, PointRef x,
                                           const std::vector<TestSet>& sets, double h) {
  if (model.kind() != ModelKind::Euclidean) throw UnsupportedModel("Faber-Krahn verification is implemented on Euclidean space");
  const int m = model.dim();
  FaberKrahnReport rep;
  for (const auto& U : sets) {
    if (U.dim() != m) throw DimensionMismatch("test set dimension differs from the model");
    if (U.reach_from(x) > fk.R(x) * (1 + 1e-12)) throw DomainError("test set " + U.describe() + " leaves B(x, R(x))");
    FaberKrahnRow row;
    row.set = U.describe();
    row.volume = U.volume();
    row.eigen = dirichlet_eigenvalue(U, h);
    row.bound = fk.a * std::pow(row.volume, -2.0 / m);
    row.margin = row.eigen.richardson - row.bound;
    rep.conclusive = rep.conclusive && row.eigen.converged;
    rep.pass = rep.pass && row.margin >= -row.eigen.tolerance;
    if (row.margin < rep.margin_min) {
      rep.margin_min = row.margin;
      rep.tolerance = row.eigen.tolerance;
    }
    rep.rows.push_back(row);
  }
  rep.pass = rep.pass && rep.conclusive;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Heat bound sup_y p(t,x,y) <= C a^{-m/2} min(t, R(x)^2)^{-m/2}

struct HeatBoundReport {
  double C_hat = 0.0;
  double t_min = 0.0, t_max = 0.0;
  std::size_t samples = 0;
  double C_hat_doubled = 0.0;  // same sweep with the t-range doubled on both ends and twice the points
  double stability = 0.0;      // |C_doubled / C - 1|
  bool pass = false;           // finite and stable within 10%
};

inline nlohmann::json to_json(const HeatBoundReport& r) {
  return {{"C_hat", json_number(r.C_hat)}, {"C_hat_doubled", json_number(r.C_hat_doubled)}, {"stability", r.stability},
          {"sweep", {{"t_min", r.t_min}, {"t_max", r.t_max}, {"samples", r.samples}}},
          {"verdict", r.pass ? "PASS" : "FAIL"}};
}

namespace detail {

inline double heat_bound_sup(const HeatKernelEngine& engine, const FaberKrahnControlPair& fk, const std::vector<double>& ts,
                             const std::vector<Point>& xs) {
  const int m = engine.model().dim();
  double c = 0.0;
  for (const auto& x : xs) {
    const double R = fk.R(x);
    for (double t : ts)
      c = std::max(c, sup_kernel_estimate(engine, t, x) * std::pow(fk.a, 0.5 * m) * std::pow(std::min(t, R * R), 0.5 * m));
  }
  return c;
}

}  // namespace detail

/// C_hat = sup over the sweep of sup_y p(t,x,y) a^{m/2} min(t, R^2)^{m/2}, checked for stability
/// under doubling the sweep.
inline HeatBoundReport heat_bound_sweep(const HeatKernelEngine& engine, const FaberKrahnControlPair& fk, double t_min,
                                        double t_max, int points, const std::vector<Point>& xs) {
  HeatBoundReport r;
  r.t_min = t_min;
  r.t_max = t_max;
  const auto ts = log_spaced(t_min, t_max, points);
  r.samples = ts.size() * xs.size();
  r.C_hat = detail::heat_bound_sup(engine, fk, ts, xs);
  r.C_hat_doubled = detail::heat_bound_sup(engine, fk, log_spaced(0.5 * t_min, 2.0 * t_max, 2 * points), xs);
  r.stability = std::abs(r.C_hat_doubled / r.C_hat - 1.0);
  r.pass = std::isfinite(r.C_hat) && r.C_hat > 0 && r.stability <= 0.1;
  return r;
}

/// I(x) = C_hat a^{-m/2} R(x)^{-m}, Itilde(t) = t^{-m/2} sup R^m + 1.
inline KatoControlPair control_pair_from_faber_krahn(const FaberKrahnControlPair& fk, const HeatBoundReport& heat, int m) {
  KatoControlPair p;
  p.name = "faber-krahn";
  p.dim = m;
  const double C = heat.C_hat, a = fk.a;
  auto R = fk.R;
  p.I = [C, a, m, R](PointRef x) { return C * std::pow(a, -0.5 * m) * std::pow(R(x), -m); };
  p.tilde_scale = std::pow(fk.R_sup, m);
  p.tilde_power = 0.5 * m;
  p.tilde_offset = 1.0;
  p.empirical = {{"C_hat", C}, {"a", a}, {"R_sup", fk.R_sup}, {"sweep", {{"t_min", heat.t_min}, {"t_max", heat.t_max}}}};
  add_certificates(p, default_certificate_qs(m));
  return p;
}

/// min(t,R^2)^{-m/2} <= t^{-m/2} + R^{-m} <= R^{-m} (t^{-m/2} sup R^m + 1); returns the smaller
/// of the two relative slacks (nonnegative when the chain holds).
inline double min_chain_slack(double t, double R, double R_sup, int m) {
  const double a = std::pow(std::min(t, R * R), -0.5 * m);
  const double b = std::pow(t, -0.5 * m) + std::pow(R, -m);
  const double c = std::pow(R, -m) * (std::pow(t, -0.5 * m) * std::pow(R_sup, m) + 1.0);
  return std::min((b - a) / b, (c - b) / c);
}

}  // namespace katokit
