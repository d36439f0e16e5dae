#pragma once

// Schroedinger semigroups e^{-tH}, H = -(1/2) Delta_h + w, on periodic grids of the circle and
// the flat 2-torus, with grid L^q operator norms, the exponential bound
// ||e^{-tH^{-w_-}}||_{q->q} <= delta e^{t C(delta)}, domination and Riesz-Thorin checks.
//
// Circle operators are stored in banded form (nodes interleaved 0, n-1, 1, n-2, ... so the
// periodic stencil has bandwidth 2) and diagonalized with LAPACK dsbevd; torus operators use a
// dense symmetric eigensolver.

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "json.hpp"
#include "kato.hpp"
#include "potentials.hpp"
#include "stochastics.hpp"

namespace katokit {

class DiscretizedOperator {
 public:
  /// n nodes on the circle, n x n nodes on Torus(2).
  DiscretizedOperator(const Manifold& model, int n, const Potential& w) : model_(model), n_(n), potential_(w.describe()) {
    const bool circle = model.kind() == ModelKind::Circle;
    const bool torus = model.kind() == ModelKind::Torus && model.dim() == 2;
    if (!circle && !torus) throw UnsupportedModel("discretization needs Circle or Torus(2), got " + model.spec());
    if (n < 8) throw DomainError("discretization needs n >= 8");
    h_ = model.side() / n;
    const int N = circle ? n : n * n;
    nodes_.resize(model.chart_dim(), N);
    for (int k = 0; k < N; ++k) {
      if (circle) {
        nodes_(0, k) = h_ * k;
      } else {
        nodes_(0, k) = h_ * (k % n);
        nodes_(1, k) = h_ * (k / n);
      }
    }
    weight_ = circle ? h_ : h_ * h_;
    potential_values_.resize(N);
    const double eps = 0.5 * h_;
    for (int k = 0; k < N; ++k) {
      if (w.singular_distance(model, nodes_.col(k)) < eps) {
        potential_values_[k] = w.evaluate_capped(model, nodes_.col(k), eps);
        ++capped_;
      } else {
        potential_values_[k] = w.evaluate(model, nodes_.col(k));
      }
    }
    if (!potential_values_.allFinite()) throw DomainError("potential is not finite on the grid");
    circle ? diagonalize_banded() : diagonalize_dense();
  }

  const Manifold& model() const { return model_; }
  int n() const { return n_; }
  Eigen::Index size() const { return potential_values_.size(); }
  double spacing() const { return h_; }
  double cell_weight() const { return weight_; }
  const Eigen::MatrixXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& potential_values() const { return potential_values_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }  // ascending
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  int capped_nodes() const { return capped_; }
  const std::string& potential() const { return potential_; }

  /// H as a dense matrix (tests and small grids).
  Eigen::MatrixXd matrix() const {
    const Eigen::Index N = size();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    const double c = 0.5 / (h_ * h_);
    for (Eigen::Index k = 0; k < N; ++k) {
      for (Eigen::Index j : neighbours(k)) {
        H(k, j) -= c;
        H(k, k) += c;
      }
      H(k, k) += potential_values_[k];
    }
    return H;
  }

  Eigen::VectorXd apply(double t, const Eigen::VectorXd& f) const {
    if (t < 0) throw DomainError("semigroup time must be nonnegative");
    if (f.size() != size()) throw DimensionMismatch("grid function has wrong length");
    if (t == 0) return f;
    const Eigen::VectorXd d = decay(t);
    const Eigen::Index k = active_modes(d);
    const Eigen::VectorXd c = eigenvectors_.leftCols(k).transpose() * f;
    return eigenvectors_.leftCols(k) * (d.head(k).asDiagonal() * c);
  }

  /// Matrix P with (e^{-tH} f)_i = sum_j P_ij f_j.
  Eigen::MatrixXd propagator(double t) const {
    if (t < 0) throw DomainError("semigroup time must be nonnegative");
    const Eigen::VectorXd d = decay(t);
    const Eigen::Index k = active_modes(d);
    const Eigen::MatrixXd scaled = eigenvectors_.leftCols(k) * d.head(k).asDiagonal();
    Eigen::MatrixXd P(size(), size());
    P.noalias() = scaled * eigenvectors_.leftCols(k).transpose();
    return P;
  }

  Eigen::VectorXd sample(const std::function<double(PointRef)>& f) const {
    Eigen::VectorXd v(size());
    for (Eigen::Index k = 0; k < size(); ++k) v[k] = f(nodes_.col(k));
    return v;
  }

  /// Weighted grid inner product sum_k h^m f_k g_k.
  double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const { return weight_ * f.dot(g); }

 private:
  Eigen::VectorXd decay(double t) const { return (-t * eigenvalues_.array()).exp().matrix(); }

  // Modes with e^{-t lambda} below 1e-18 of the leading one are dropped: they are below rounding
  // and would otherwise push the products into subnormal arithmetic.
  static Eigen::Index active_modes(const Eigen::VectorXd& d) {
    Eigen::Index k = d.size();
    while (k > 1 && d[k - 1] < 1e-18 * d[0]) --k;
    return k;
  }

  std::vector<Eigen::Index> neighbours(Eigen::Index k) const {
    if (model_.kind() == ModelKind::Circle) return {(k + 1) % n_, (k + n_ - 1) % n_};
    const Eigen::Index i = k % n_, j = k / n_;
    return {(i + 1) % n_ + j * n_, (i + n_ - 1) % n_ + j * n_, i + ((j + 1) % n_) * n_, i + ((j + n_ - 1) % n_) * n_};
  }

  void diagonalize_banded() {
    const lapack_int N = n_, kd = 2, ldab = kd + 1;
    std::vector<lapack_int> perm(N);  // banded position -> node
    for (lapack_int p = 0; p < N; ++p) perm[p] = p % 2 == 0 ? p / 2 : N - 1 - (p - 1) / 2;
    std::vector<lapack_int> pos(N);
    for (lapack_int p = 0; p < N; ++p) pos[perm[p]] = p;
    std::vector<double> ab(static_cast<std::size_t>(ldab) * N, 0.0);
    const double c = 0.5 / (h_ * h_);
    auto set = [&](lapack_int i, lapack_int j, double v) {  // upper triangle, column major
      if (i > j) std::swap(i, j);
      ab[kd + i - j + static_cast<std::size_t>(j) * ldab] += v;
    };
    for (lapack_int k = 0; k < N; ++k) {
      set(pos[k], pos[k], 2.0 * c + potential_values_[k]);
      set(pos[k], pos[(k + 1) % N], -c);
    }
    Eigen::VectorXd w(N);
    Eigen::MatrixXd z(N, N);
    const lapack_int info = LAPACKE_dsbevd(LAPACK_COL_MAJOR, 'V', 'U', N, kd, ab.data(), ldab, w.data(), z.data(), N);
    if (info != 0) throw NumericalFailure("dsbevd failed with info " + std::to_string(info));
    eigenvalues_ = w;
    eigenvectors_.resize(N, N);
    for (lapack_int p = 0; p < N; ++p) eigenvectors_.row(perm[p]) = z.row(p);
  }

  void diagonalize_dense() {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix());
    if (es.info() != Eigen::Success) throw NumericalFailure("dense eigensolver failed");
    eigenvalues_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
  }

  Manifold model_;
  int n_;
  double h_ = 0.0;
  double weight_ = 0.0;
  std::string potential_;
  Eigen::MatrixXd nodes_;
  Eigen::VectorXd potential_values_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  int capped_ = 0;
};

// ---------------------------------------------------------------------------------------------
// Operator norms.  Weights are uniform, so grid L^q norms of the kernel operator reduce to matrix
// l^q norms.

struct QNorm {
  double q = 0.0;
  double t = 0.0;
  double value = 0.0;
  bool exact = true;  // false: power-iteration lower bound
  int iterations = 0;
};

namespace detail {

inline double lq_vec(const Eigen::VectorXd& v, double q) {
  if (std::isinf(q)) return v.cwiseAbs().maxCoeff();
  return std::pow(v.cwiseAbs().array().pow(q).sum(), 1.0 / q);
}

inline Eigen::VectorXd dual_map(const Eigen::VectorXd& y, double p) {
  return (y.array().sign() * y.cwiseAbs().array().pow(p - 1.0)).matrix();
}

// Boyd's power iteration for ||A||_{p->p}, A = A^T entrywise nonnegative.  Every iterate is a
// test vector, so the returned ratio is a lower bound.
inline QNorm boyd_norm(const DiscretizedOperator& op, double t, double p, int max_iter = 500, double rtol = 1e-14) {
  QNorm r;
  r.q = p;
  r.t = t;
  r.exact = false;
  const double pd = p / (p - 1.0);
  std::vector<Eigen::VectorXd> starts{Eigen::VectorXd::Ones(op.size()), op.eigenvectors().col(0).cwiseAbs()};
  for (auto x : starts) {
    x /= lq_vec(x, p);
    double prev = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      const Eigen::VectorXd y = op.apply(t, x);
      const double est = lq_vec(y, p);
      r.value = std::max(r.value, est);
      r.iterations = std::max(r.iterations, it + 1);
      if (std::abs(est - prev) <= rtol * est) break;
      prev = est;
      Eigen::VectorXd z = dual_map(op.apply(t, dual_map(y, p)), pd);
      const double nz = lq_vec(z, p);
      if (!(nz > 0)) break;
      x = z / nz;
    }
  }
  return r;
}

}  // namespace detail

inline QNorm q_norm(const DiscretizedOperator& op, double t, double q) {
  if (!(q >= 1.0)) throw DomainError("q must lie in [1, inf]");
  QNorm r;
  r.q = q;
  r.t = t;
  if (q == 2.0) {
    r.value = (-t * op.eigenvalues().array()).exp().maxCoeff();
    return r;
  }
  if (q == 1.0 || std::isinf(q)) {
    const Eigen::MatrixXd P = op.propagator(t).cwiseAbs();
    r.value = q == 1.0 ? P.colwise().sum().maxCoeff() : P.rowwise().sum().maxCoeff();
    return r;
  }
  return detail::boyd_norm(op, t, q);
}

// ---------------------------------------------------------------------------------------------
// Exponential bound, domination and interpolation

struct BopRow {
  double q = 0.0, t = 0.0, norm = 0.0, delta = 0.0, C_delta = 0.0, margin = 0.0;  // margin = log(delta e^{tC} / norm)
};

struct BopReport {
  std::string potential;
  int n = 0;
  std::vector<BopRow> rows;
  std::vector<ExponentialRow> constants;  // C(delta) from the q = inf norms
  double margin_min = kInf;
  double domination_violation = 0.0;  // max over samples of |e^{-tH^w}f| - e^{-tH^{-w_-}}|f|
  double tolerance = 1e-10;
  bool pass = false;
};

inline nlohmann::json to_json(const BopReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& b : r.rows)
    rows.push_back({{"q", json_number(b.q)}, {"t", b.t}, {"norm", b.norm}, {"delta", b.delta}, {"C_delta", b.C_delta}, {"margin", b.margin}});
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : r.constants) cs.push_back({{"delta", c.delta}, {"C", c.C}});
  return {{"potential", r.potential}, {"n", r.n}, {"rows", rows}, {"C_delta", cs}, {"margin_min", r.margin_min},
          {"domination_violation", r.domination_violation}, {"tolerance", r.tolerance}, {"verdict", r.pass ? "PASS" : "FAIL"}};
}

/// Largest amount by which |e^{-tH^w} f| exceeds e^{-tH^{-w_-}} |f| over random f, relative to
/// the sup of the right side.
inline double domination_violation(const DiscretizedOperator& op_w, const DiscretizedOperator& op_minus, double t, int samples,
                                   std::uint64_t seed) {
  if (op_w.size() != op_minus.size()) throw DimensionMismatch("operators live on different grids");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd f(op_w.size());
    for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = normal(rng);
    const Eigen::VectorXd lhs = op_w.apply(t, f).cwiseAbs();
    const Eigen::VectorXd rhs = op_minus.apply(t, f.cwiseAbs());
    worst = std::max(worst, (lhs - rhs).maxCoeff() / rhs.cwiseAbs().maxCoeff());
  }
  return worst;
}

/// Checks ||e^{-tH^{-w_-}}||_{q->q} <= delta e^{tC(delta)} with C(delta) fitted to the q = inf
/// norms, plus domination for w = w_plus - w_minus.  w_minus must be nonnegative.
inline BopReport bop_bound_check(const Manifold& model, int n, const Potential& w_minus, const std::vector<double>& ts,
                                 const std::vector<double>& deltas, const std::vector<double>& qs,
                                 const Potential& w_plus = Potential::constant(0.0), double tol = 1e-10, std::uint64_t seed = 1) {
  const DiscretizedOperator op(model, n, Potential::scale(-1.0, w_minus));
  if ((op.potential_values().array() > 0).any()) throw DomainError("w_minus must be nonnegative");
  BopReport rep;
  rep.potential = w_minus.describe();
  rep.n = n;
  rep.tolerance = tol;
  std::vector<double> inf_norms;
  for (double t : ts) inf_norms.push_back(q_norm(op, t, kInf).value);
  for (double d : deltas) rep.constants.push_back(fit_exponential_constant(ts, inf_norms, d));
  for (double q : qs)
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double norm = std::isinf(q) ? inf_norms[i] : q_norm(op, ts[i], q).value;
      for (const auto& c : rep.constants) {
        BopRow row{q, ts[i], norm, c.delta, c.C, std::log(c.delta) + ts[i] * c.C - std::log(norm)};
        rep.margin_min = std::min(rep.margin_min, row.margin);
        rep.rows.push_back(row);
      }
    }
  const DiscretizedOperator op_w(model, n, Potential::sum({w_plus, Potential::scale(-1.0, w_minus)}));
  for (double t : ts)
    if (t > 0) rep.domination_violation = std::max(rep.domination_violation, domination_violation(op_w, op, t, 4, seed));
  rep.pass = rep.margin_min >= -tol && rep.domination_violation <= tol;
  return rep;
}

struct RieszThorinRow {
  double r = 0.0, q = 0.0, norm = 0.0, bound = 0.0, margin = 0.0;  // bound = N_1^{1-r} N_inf^r
};

struct RieszThorinReport {
  double t = 0.0;
  double norm_1 = 0.0, norm_inf = 0.0;
  std::vector<RieszThorinRow> rows;
  double margin_min = kInf;
  bool pass = false;
};

inline nlohmann::json to_json(const RieszThorinReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows) rows.push_back({{"r", x.r}, {"q", x.q}, {"norm", x.norm}, {"bound", x.bound}, {"margin", x.margin}});
  return {{"t", r.t}, {"norm_1", r.norm_1}, {"norm_inf", r.norm_inf}, {"rows", rows}, {"margin_min", r.margin_min},
          {"verdict", r.pass ? "PASS" : "FAIL"}};
}

inline RieszThorinReport riesz_thorin_check(const DiscretizedOperator& op, double t, const std::vector<double>& rs, double tol = 1e-10) {
  RieszThorinReport rep;
  rep.t = t;
  rep.norm_1 = q_norm(op, t, 1.0).value;
  rep.norm_inf = q_norm(op, t, kInf).value;
  for (double r : rs) {
    if (!(r > 0 && r < 1)) throw DomainError("interpolation parameter must lie in (0,1)");
    RieszThorinRow row;
    row.r = r;
    row.q = 1.0 / (1.0 - r);
    row.norm = q_norm(op, t, row.q).value;
    row.bound = std::pow(rep.norm_1, 1.0 - r) * std::pow(rep.norm_inf, r);
    row.margin = row.bound - row.norm;
    rep.margin_min = std::min(rep.margin_min, row.margin);
    rep.rows.push_back(row);
  }
  rep.pass = rep.margin_min >= -tol;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Monte Carlo against the spectral semigroup

struct SpectralAgreementRow {
  double t = 0.0;
  double spectral = 0.0;
  double spectral_refined = 0.0;  // n doubled
  double mc = 0.0;
  double std_error = 0.0;
  double z = 0.0;
};

/// (e^{-tH^w} f)(x_k) by the grid semigroup at n and 2n and by Feynman-Kac from node k of the
/// coarse grid.
inline std::vector<SpectralAgreementRow> feynman_kac_vs_spectral(const Manifold& model, int n, const Potential& w,
                                                                 const TestFunction& f, Eigen::Index node,
                                                                 const std::vector<double>& ts, long paths, double h,
                                                                 std::uint64_t seed, int threads = 1) {
  const DiscretizedOperator coarse(model, n, w), fine(model, 2 * n, w);
  const Eigen::VectorXd fc = coarse.sample(f), ff = fine.sample(f);
  const Eigen::Index fine_node = model.kind() == ModelKind::Circle ? 2 * node : 2 * (node % n) + 2 * (node / n) * (2 * n);
  std::vector<SpectralAgreementRow> rows;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    SpectralAgreementRow row;
    row.t = ts[i];
    row.spectral = coarse.apply(ts[i], fc)[node];
    row.spectral_refined = fine.apply(ts[i], ff)[fine_node];
    SimulationConfig c;
    c.model = model;
    c.start = coarse.nodes().col(node);
    c.t = ts[i];
    c.h = h;
    c.paths = paths;
    c.seed = seed + i;
    c.threads = threads;
    const auto est = feynman_kac(c, w, f);
    row.mc = est.value;
    row.std_error = est.std_error;
    row.z = (row.mc - row.spectral_refined) / row.std_error;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace katokit
