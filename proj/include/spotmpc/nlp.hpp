// Smooth nonconvex NLP solver: primal-dual interior point with an exact
// l1-merit line search, inertia-corrected sparse LDL^T steps, an elastic
// restoration phase, and seeded multistart.
//
//   minimize f(x)  s.t.  c_E(x) = 0,  c_I(x) <= 0,  lower <= x <= upper
#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace spotmpc {

using Triplet = Eigen::Triplet<double>;

// Callbacks are const and must be safe to call concurrently.
class NlpInstance {
 public:
  virtual ~NlpInstance() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t num_equalities() const = 0;
  virtual std::size_t num_inequalities() const = 0;
  virtual std::span<const double> lower() const = 0;
  virtual std::span<const double> upper() const = 0;
  // Returns f(x) and writes [c_E(x); c_I(x)] into `c`.
  virtual double evaluate(std::span<const double> x, std::span<double> c) const = 0;
  // grad = objective_weight * grad f(x) + sum_i weights[i] * grad c_i(x).
  virtual void gradient(std::span<const double> x, double objective_weight,
                        std::span<const double> weights, std::span<double> grad) const = 0;

  // Nonzeros of the constraint Jacobian, rows ordered [c_E; c_I]. Duplicates
  // are summed. The default builds rows from `gradient`.
  virtual void jacobian(std::span<const double> x, std::vector<Triplet>& out) const {
    const std::size_t n = dimension(), m = num_constraints();
    std::vector<double> w(m, 0.0), g(n);
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = 1.0;
      gradient(x, 0.0, w, g);
      w[i] = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (g[j] != 0.0) out.emplace_back(static_cast<int>(i), static_cast<int>(j), g[j]);
    }
  }

  // Lower triangle (row >= col) of the Hessian of
  // objective_weight * f + sum_i weights[i] * c_i. Duplicates are summed.
  // The default uses central differences of `gradient`.
  virtual void hessian(std::span<const double> x, double objective_weight,
                       std::span<const double> weights, std::vector<Triplet>& out) const {
    const std::size_t n = dimension();
    std::vector<double> xp(x.begin(), x.end()), gp(n), gm(n);
    std::vector<std::vector<double>> cols(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
      xp[j] = x[j] + h;
      gradient(xp, objective_weight, weights, gp);
      xp[j] = x[j] - h;
      gradient(xp, objective_weight, weights, gm);
      xp[j] = x[j];
      for (std::size_t i = 0; i < n; ++i) cols[j][i] = (gp[i] - gm[i]) / (2 * h);
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = j; i < n; ++i) {
        const double v = 0.5 * (cols[j][i] + cols[i][j]);
        if (v != 0.0) out.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
      }
  }

  // Fills dependent coordinates of a start point after the sampled ones are set.
  virtual void complete_start(std::span<double> /*x*/) const {}

  std::size_t num_constraints() const { return num_equalities() + num_inequalities(); }
};

// Instance assembled from plain callables with a dense constraint Jacobian.
class FunctionNlp final : public NlpInstance {
 public:
  using Vec = std::vector<double>;
  std::function<double(std::span<const double>)> objective;
  std::function<void(std::span<const double>, std::span<double>)> objective_gradient;
  // Writes [c_E; c_I].
  std::function<void(std::span<const double>, std::span<double>)> constraints;
  // Writes the dense Jacobian row-major, (num_constraints x dimension).
  std::function<void(std::span<const double>, std::span<double>)> dense_jacobian;
  Vec lo, hi;
  std::size_t n_eq = 0, n_ineq = 0;

  std::size_t dimension() const override { return lo.size(); }
  std::size_t num_equalities() const override { return n_eq; }
  std::size_t num_inequalities() const override { return n_ineq; }
  std::span<const double> lower() const override { return lo; }
  std::span<const double> upper() const override { return hi; }

  double evaluate(std::span<const double> x, std::span<double> c) const override {
    if (num_constraints() > 0) constraints(x, c);
    return objective(x);
  }

  void gradient(std::span<const double> x, double objective_weight, std::span<const double> weights,
                std::span<double> grad) const override {
    const std::size_t n = dimension();
    objective_gradient(x, grad);
    for (auto& g : grad) g *= objective_weight;
    const std::size_t m = num_constraints();
    if (m == 0) return;
    Vec jac(m * n);
    dense_jacobian(x, jac);
    for (std::size_t i = 0; i < m; ++i) {
      if (weights[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) grad[j] += weights[i] * jac[i * n + j];
    }
  }

  void jacobian(std::span<const double> x, std::vector<Triplet>& out) const override {
    const std::size_t n = dimension(), m = num_constraints();
    if (m == 0) return;
    Vec jac(m * n);
    dense_jacobian(x, jac);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (jac[i * n + j] != 0.0) out.emplace_back(static_cast<int>(i), static_cast<int>(j), jac[i * n + j]);
  }
};

class NlpCallbackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolveStatus { OptimalLocal, FeasibleSuboptimal, Infeasible, IterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::OptimalLocal: return "optimal-local";
    case SolveStatus::FeasibleSuboptimal: return "feasible-suboptimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double violation = 0.0;
  double step_norm = 0.0;
  double barrier = 0.0;
  double alpha = 0.0;
  double alpha_max = 0.0;
  double regularization = 0.0;
};

struct SolverSettings {
  double feasibility_tol = 1e-6;
  double optimality_tol = 1e-6;
  int max_iterations = 500;
  int multistart = 15;
  std::uint64_t seed = 0;
  int threads = 1;
  std::function<void(const IterationRecord&)> on_iteration;
};

struct Solution {
  std::vector<double> x;
  double objective = std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();
  double kkt_residual = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::Infeasible;
  int iterations = 0;
  bool restored = false;
  int start_index = -1;

  bool feasible() const { return status != SolveStatus::Infeasible; }
};

// Max violation (equalities two-sided, inequalities one-sided).
inline double constraint_violation(const NlpInstance& inst, std::span<const double> c) {
  double v = 0.0;
  const std::size_t ne = inst.num_equalities();
  for (std::size_t i = 0; i < c.size(); ++i) v = std::max(v, i < ne ? std::abs(c[i]) : c[i]);
  return v;
}

namespace detail {

inline void check_finite(double f, std::span<const double> values, const char* what) {
  if (!std::isfinite(f)) throw NlpCallbackError(std::string("non-finite ") + what);
  for (double v : values)
    if (!std::isfinite(v)) throw NlpCallbackError(std::string("non-finite ") + what);
}

// Minimizes the l1 norm of the constraint violation; x part is the first n
// coordinates.
class ElasticNlp final : public NlpInstance {
 public:
  ElasticNlp(const NlpInstance& inner, std::span<const double> anchor, double proximity)
      : in_(inner), anchor_(anchor.begin(), anchor.end()), prox_(proximity) {
    n_ = in_.dimension();
    me_ = in_.num_equalities();
    mi_ = in_.num_inequalities();
    const std::size_t dim = n_ + 2 * me_ + mi_;
    lo_.assign(dim, 0.0);
    hi_.assign(dim, std::numeric_limits<double>::infinity());
    std::copy(in_.lower().begin(), in_.lower().end(), lo_.begin());
    std::copy(in_.upper().begin(), in_.upper().end(), hi_.begin());
  }

  std::size_t dimension() const override { return lo_.size(); }
  std::size_t num_equalities() const override { return me_; }
  std::size_t num_inequalities() const override { return mi_; }
  std::span<const double> lower() const override { return lo_; }
  std::span<const double> upper() const override { return hi_; }

  double evaluate(std::span<const double> z, std::span<double> c) const override {
    in_.evaluate(z.first(n_), c);
    double f = 0;
    for (std::size_t i = 0; i < me_; ++i) {
      c[i] += -z[n_ + i] + z[n_ + me_ + i];
      f += z[n_ + i] + z[n_ + me_ + i];
    }
    for (std::size_t i = 0; i < mi_; ++i) {
      c[me_ + i] -= z[n_ + 2 * me_ + i];
      f += z[n_ + 2 * me_ + i];
    }
    for (std::size_t j = 0; j < n_; ++j) f += 0.5 * prox_ * (z[j] - anchor_[j]) * (z[j] - anchor_[j]);
    return f;
  }

  void gradient(std::span<const double> z, double ow, std::span<const double> w,
                std::span<double> grad) const override {
    in_.gradient(z.first(n_), 0.0, w, grad.first(n_));
    for (std::size_t j = 0; j < n_; ++j) grad[j] += ow * prox_ * (z[j] - anchor_[j]);
    for (std::size_t i = 0; i < me_; ++i) {
      grad[n_ + i] = ow - w[i];
      grad[n_ + me_ + i] = ow + w[i];
    }
    for (std::size_t i = 0; i < mi_; ++i) grad[n_ + 2 * me_ + i] = ow - w[me_ + i];
  }

  void jacobian(std::span<const double> z, std::vector<Triplet>& out) const override {
    in_.jacobian(z.first(n_), out);
    for (std::size_t i = 0; i < me_; ++i) {
      out.emplace_back(static_cast<int>(i), static_cast<int>(n_ + i), -1.0);
      out.emplace_back(static_cast<int>(i), static_cast<int>(n_ + me_ + i), 1.0);
    }
    for (std::size_t i = 0; i < mi_; ++i)
      out.emplace_back(static_cast<int>(me_ + i), static_cast<int>(n_ + 2 * me_ + i), -1.0);
  }

  void hessian(std::span<const double> z, double ow, std::span<const double> w,
               std::vector<Triplet>& out) const override {
    in_.hessian(z.first(n_), 0.0, w, out);
    for (std::size_t j = 0; j < n_; ++j) out.emplace_back(static_cast<int>(j), static_cast<int>(j), ow * prox_);
  }

  std::vector<double> start(std::span<const double> x) const {
    std::vector<double> z(dimension(), 0.0);
    std::copy(x.begin(), x.end(), z.begin());
    std::vector<double> c(in_.num_constraints());
    in_.evaluate(x, c);
    for (std::size_t i = 0; i < me_; ++i) {
      z[n_ + i] = std::max(c[i], 0.0) + 1e-2;
      z[n_ + me_ + i] = std::max(-c[i], 0.0) + 1e-2;
    }
    for (std::size_t i = 0; i < mi_; ++i) z[n_ + 2 * me_ + i] = std::max(c[me_ + i], 0.0) + 1e-2;
    return z;
  }

 private:
  const NlpInstance& in_;
  std::vector<double> anchor_;
  double prox_;
  std::size_t n_ = 0, me_ = 0, mi_ = 0;
  std::vector<double> lo_, hi_;
};

struct IpmOutcome {
  Solution sol;
  bool line_search_failed = false;
};

inline IpmOutcome interior_point(const NlpInstance& inst, std::span<const double> x_start,
                                 const SolverSettings& st) {
  using SpMat = Eigen::SparseMatrix<double>;
  const std::size_t n = inst.dimension();
  const std::size_t me = inst.num_equalities();
  const std::size_t mi = inst.num_inequalities();
  const std::size_t m = me + mi;
  const auto lo = inst.lower();
  const auto hi = inst.upper();
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Free variables; fixed ones stay at their bound.
  std::vector<int> fcol(n, -1);
  std::vector<std::size_t> fidx;
  for (std::size_t i = 0; i < n; ++i)
    if (lo[i] < hi[i]) {
      fcol[i] = static_cast<int>(fidx.size());
      fidx.push_back(i);
    }
  const std::size_t nf = fidx.size();

  std::vector<double> x(x_start.begin(), x_start.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (fcol[i] < 0) {
      x[i] = lo[i];
      continue;
    }
    const bool hl = std::isfinite(lo[i]), hu = std::isfinite(hi[i]);
    if (hl && hu) {
      const double pl = std::min(1e-2 * std::max(1.0, std::abs(lo[i])), 1e-2 * (hi[i] - lo[i]));
      const double pu = std::min(1e-2 * std::max(1.0, std::abs(hi[i])), 1e-2 * (hi[i] - lo[i]));
      x[i] = std::clamp(x[i], lo[i] + pl, hi[i] - pu);
    } else if (hl) {
      x[i] = std::max(x[i], lo[i] + 1e-2 * std::max(1.0, std::abs(lo[i])));
    } else if (hu) {
      x[i] = std::min(x[i], hi[i] - 1e-2 * std::max(1.0, std::abs(hi[i])));
    }
  }
  auto has_lo = [&](std::size_t i) { return std::isfinite(lo[i]); };
  auto has_hi = [&](std::size_t i) { return std::isfinite(hi[i]); };

  std::vector<double> c(m), c_trial(m);
  double f = inst.evaluate(x, c);
  check_finite(f, c, "objective or constraint value at the start point");

  double mu = 0.1;
  std::vector<double> s(mi), y(m, 0.0), zl(n, 0.0), zu(n, 0.0);
  for (std::size_t i = 0; i < mi; ++i) {
    s[i] = std::max(-c[me + i], 1e-2);
    y[me + i] = 1.0;
  }
  for (std::size_t i : fidx) {
    if (has_lo(i)) zl[i] = 1.0;
    if (has_hi(i)) zu[i] = 1.0;
  }

  double nu = 1.0;          // merit penalty
  double delta_last = 0.0;  // last Hessian regularization
  const double delta_c = 1e-9;
  constexpr double kappa_sigma = 1e10;

  std::vector<double> grad_l(n), grad_f(n), dx_full(n, 0.0);
  std::vector<Triplet> jt, ht, kt;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  std::vector<double> x_trial(n), s_trial(mi);

  auto barrier_merit = [&](const std::vector<double>& xv, const std::vector<double>& sv, double fv,
                           const std::vector<double>& cv) {
    double phi = fv;
    for (std::size_t i : fidx) {
      if (has_lo(i)) phi -= mu * std::log(xv[i] - lo[i]);
      if (has_hi(i)) phi -= mu * std::log(hi[i] - xv[i]);
    }
    double th = 0;
    for (std::size_t i = 0; i < mi; ++i) {
      phi -= mu * std::log(sv[i]);
      th += std::abs(cv[me + i] + sv[i]);
    }
    for (std::size_t i = 0; i < me; ++i) th += std::abs(cv[i]);
    return std::pair{phi, th};
  };

  IpmOutcome out;
  Solution& sol = out.sol;
  int iter = 0;
  double kkt0 = inf;
  bool converged = false;
  double step_delta = 0.0;  // regularization of the latest step
  int escapes = 0;
  std::mt19937_64 escape_rng(0x5eed);
  std::vector<std::pair<double, double>> filter;
  double theta_max = -1.0;
  for (; iter <= st.max_iterations; ++iter) {
    inst.gradient(x, 1.0, y, grad_l);
    check_finite(0.0, grad_l, "gradient");

    // Optimality measures.
    double y1 = 0, z1 = 0;
    std::size_t nb = 0;
    for (double v : y) y1 += std::abs(v);
    for (std::size_t i : fidx) {
      z1 += zl[i] + zu[i];
      nb += (has_lo(i) ? 1 : 0) + (has_hi(i) ? 1 : 0);
    }
    const double smax = 100.0;
    const double sd = std::max(smax, (y1 + z1) / std::max<double>(1.0, static_cast<double>(m + nb))) / smax;
    const double sc = std::max(smax, z1 / std::max<double>(1.0, static_cast<double>(nb))) / smax;
    auto errors = [&](double mu_t) {
      double dual = 0, compl_err = 0, prim = 0;
      for (std::size_t i : fidx) dual = std::max(dual, std::abs(grad_l[i] - zl[i] + zu[i]));
      for (std::size_t i : fidx) {
        if (has_lo(i)) compl_err = std::max(compl_err, std::abs((x[i] - lo[i]) * zl[i] - mu_t));
        if (has_hi(i)) compl_err = std::max(compl_err, std::abs((hi[i] - x[i]) * zu[i] - mu_t));
      }
      for (std::size_t i = 0; i < mi; ++i) {
        compl_err = std::max(compl_err, std::abs(s[i] * y[me + i] - mu_t));
        prim = std::max(prim, std::abs(c[me + i] + s[i]));
      }
      for (std::size_t i = 0; i < me; ++i) prim = std::max(prim, std::abs(c[i]));
      return std::max({dual / sd, prim, compl_err / sc});
    };
    const double viol = constraint_violation(inst, c);
    kkt0 = errors(0.0);
    if (kkt0 <= st.optimality_tol && viol <= st.feasibility_tol) {
      // A KKT point where the last step needed regularization may be a saddle:
      // nudge the iterate and continue a few times.
      if (step_delta > 0.0 && escapes < 3 && iter < st.max_iterations) {
        ++escapes;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (std::size_t i : fidx) {
          const double span = has_lo(i) && has_hi(i) ? hi[i] - lo[i] : std::max(1.0, std::abs(x[i]));
          double xi = x[i] + 1e-2 * span * u(escape_rng);
          if (has_lo(i)) xi = std::max(xi, lo[i] + 1e-3 * (has_hi(i) ? hi[i] - lo[i] : 1.0));
          if (has_hi(i)) xi = std::min(xi, hi[i] - 1e-3 * (has_lo(i) ? hi[i] - lo[i] : 1.0));
          x[i] = xi;
        }
        f = inst.evaluate(x, c);
        for (std::size_t i = 0; i < mi; ++i) s[i] = std::max(-c[me + i], 1e-2);
        mu = 0.1;
        step_delta = 0.0;
        filter.clear();
        continue;
      }
      converged = true;
      break;
    }
    if (iter == st.max_iterations) break;
    while (mu > st.optimality_tol / 10 && errors(mu) <= 10 * mu) {
      mu = std::max(st.optimality_tol / 10, std::min(0.2 * mu, std::pow(mu, 1.5)));
      filter.clear();
    }

    // Assemble the reduced KKT matrix (lower triangle).
    jt.clear();
    ht.clear();
    kt.clear();
    inst.jacobian(x, jt);
    inst.hessian(x, 1.0, y, ht);
    std::vector<double> sigma(nf, 0.0);
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t i = fidx[k];
      if (has_lo(i)) sigma[k] += zl[i] / (x[i] - lo[i]);
      if (has_hi(i)) sigma[k] += zu[i] / (hi[i] - x[i]);
    }
    for (const auto& t : ht) {
      const int r = fcol[static_cast<std::size_t>(t.row())], cc = fcol[static_cast<std::size_t>(t.col())];
      if (r < 0 || cc < 0) continue;
      kt.emplace_back(std::max(r, cc), std::min(r, cc), t.value());
    }
    std::vector<Triplet> jf;  // free columns only
    jf.reserve(jt.size());
    for (const auto& t : jt) {
      const int cc = fcol[static_cast<std::size_t>(t.col())];
      if (cc < 0) continue;
      jf.emplace_back(t.row(), cc, t.value());
      kt.emplace_back(static_cast<int>(nf) + t.row(), cc, t.value());
    }
    const std::size_t base_k = kt.size();
    const std::size_t dim = nf + m;

    Eigen::VectorXd rhs(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t i = fidx[k];
      double r = grad_l[i];
      if (has_lo(i)) r -= mu / (x[i] - lo[i]);
      if (has_hi(i)) r += mu / (hi[i] - x[i]);
      rhs(static_cast<Eigen::Index>(k)) = -r;
    }
    for (std::size_t i = 0; i < me; ++i) rhs(static_cast<Eigen::Index>(nf + i)) = -c[i];
    for (std::size_t i = 0; i < mi; ++i)
      rhs(static_cast<Eigen::Index>(nf + me + i)) = -c[me + i] - mu / y[me + i];

    // Inertia-corrected factorization.
    double delta = 0.0;
    Eigen::VectorXd sol_vec;
    bool factored = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      kt.resize(base_k);
      for (std::size_t k = 0; k < nf; ++k)
        kt.emplace_back(static_cast<int>(k), static_cast<int>(k), sigma[k] + delta);
      for (std::size_t i = 0; i < me; ++i)
        kt.emplace_back(static_cast<int>(nf + i), static_cast<int>(nf + i), -delta_c);
      for (std::size_t i = 0; i < mi; ++i)
        kt.emplace_back(static_cast<int>(nf + me + i), static_cast<int>(nf + me + i),
                        -s[i] / y[me + i] - delta_c);
      SpMat K(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      K.setFromTriplets(kt.begin(), kt.end());
      ldlt.compute(K);
      bool ok = ldlt.info() == Eigen::Success;
      if (ok) {
        const auto& d = ldlt.vectorD();
        std::size_t pos = 0, neg = 0;
        for (Eigen::Index k = 0; k < d.size(); ++k) {
          if (d(k) > 0) ++pos;
          else if (d(k) < 0) ++neg;
        }
        ok = pos == nf && neg == m;
      }
      if (ok) {
        sol_vec = ldlt.solve(rhs);
        ok = sol_vec.allFinite();
      }
      if (ok) {
        factored = true;
        break;
      }
      if (delta == 0.0)
        delta = delta_last == 0.0 ? 1e-4 : std::max(1e-20, delta_last / 3);
      else
        delta *= delta_last == 0.0 ? 100.0 : 8.0;
      if (delta > 1e40) break;
    }
    if (!factored) {
      out.line_search_failed = true;
      break;
    }
    if (delta > 0) delta_last = delta;
    step_delta = delta;

    std::vector<double> dx(nf), dy(m), ds(mi);
    for (std::size_t k = 0; k < nf; ++k) dx[k] = sol_vec(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < m; ++i) dy[i] = sol_vec(static_cast<Eigen::Index>(nf + i));
    // ds = -(c_I + s) - J_I dx
    for (std::size_t i = 0; i < mi; ++i) ds[i] = -(c[me + i] + s[i]);
    for (const auto& t : jf)
      if (static_cast<std::size_t>(t.row()) >= me)
        ds[static_cast<std::size_t>(t.row()) - me] -= t.value() * dx[static_cast<std::size_t>(t.col())];

    const double tau = std::max(0.99, 1.0 - mu);
    double amax = 1.0, az = 1.0;
    std::vector<double> dzl(nf, 0.0), dzu(nf, 0.0);
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t i = fidx[k];
      if (has_lo(i)) {
        const double gap = x[i] - lo[i];
        if (dx[k] < 0) amax = std::min(amax, -tau * gap / dx[k]);
        dzl[k] = mu / gap - zl[i] - zl[i] / gap * dx[k];
        if (dzl[k] < 0) az = std::min(az, -tau * zl[i] / dzl[k]);
      }
      if (has_hi(i)) {
        const double gap = hi[i] - x[i];
        if (dx[k] > 0) amax = std::min(amax, tau * gap / dx[k]);
        dzu[k] = mu / gap - zu[i] + zu[i] / gap * dx[k];
        if (dzu[k] < 0) az = std::min(az, -tau * zu[i] / dzu[k]);
      }
    }
    for (std::size_t i = 0; i < mi; ++i) {
      if (ds[i] < 0) amax = std::min(amax, -tau * s[i] / ds[i]);
      if (dy[me + i] < 0) az = std::min(az, -tau * y[me + i] / dy[me + i]);
    }

    // Merit line search.
    auto [phi0, th0] = barrier_merit(x, s, f, c);
    inst.gradient(x, 1.0, std::vector<double>(m, 0.0), grad_f);
    double dphi = 0;
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t i = fidx[k];
      double g = grad_f[i];
      if (has_lo(i)) g -= mu / (x[i] - lo[i]);
      if (has_hi(i)) g += mu / (hi[i] - x[i]);
      dphi += g * dx[k];
    }
    for (std::size_t i = 0; i < mi; ++i) dphi -= mu * ds[i] / s[i];
    double ymax = 0;
    for (std::size_t i = 0; i < m; ++i) ymax = std::max(ymax, std::abs(y[i] + dy[i]));
    nu = std::max(nu, 1.1 * ymax + 1e-6);
    if (th0 > 0 && dphi - nu * th0 >= 0) nu = (dphi + 1e-8) / th0 * 2.0;
    const double dmerit = dphi - nu * th0;

    double alpha = amax;
    double f_trial = f;
    bool accepted = false;
    double dmax = 0, xmax = 0;
    for (std::size_t k = 0; k < nf; ++k) {
      dmax = std::max(dmax, std::abs(dx[k]));
      xmax = std::max(xmax, std::abs(x[fidx[k]]));
    }
    for (std::size_t i = 0; i < mi; ++i) {
      dmax = std::max(dmax, std::abs(ds[i]));
      xmax = std::max(xmax, s[i]);
    }
    const bool negligible = dmax <= 1e-8 * (1.0 + xmax);
    auto try_point = [&](double a) {
      for (std::size_t i = 0; i < n; ++i) x_trial[i] = x[i];
      for (std::size_t k = 0; k < nf; ++k) x_trial[fidx[k]] = x[fidx[k]] + a * dx[k];
      for (std::size_t i = 0; i < mi; ++i) s_trial[i] = s[i] + a * ds[i];
      f_trial = inst.evaluate(x_trial, c_trial);
      bool finite = std::isfinite(f_trial);
      for (double v : c_trial) finite = finite && std::isfinite(v);
      return finite;
    };

    // Filter line search on (infeasibility, barrier objective).
    if (theta_max < 0) theta_max = 1e4 * std::max(1.0, th0);
    const double theta_min = 1e-4 * std::max(1.0, theta_max / 1e4);
    const bool switching_possible = th0 <= theta_min && dphi < 0;
    const double alpha_min = 1e-12;
    bool f_type = false;
    for (int ls = 0; ls < 60 && alpha > alpha_min; ++ls) {
      if (!try_point(alpha)) {
        alpha *= 0.5;
        continue;
      }
      if (negligible) {
        accepted = true;
        break;
      }
      auto [phi1, th1] = barrier_merit(x_trial, s_trial, f_trial, c_trial);
      bool ok = th1 <= theta_max;
      for (const auto& [ft, fp] : filter) ok = ok && (th1 < ft || phi1 < fp);
      if (ok) {
        const double slack = 1e-13 * std::abs(phi0);
        if (switching_possible && alpha * std::pow(-dphi, 2.3) > std::pow(th0, 1.1)) {
          f_type = true;
          ok = phi1 <= phi0 + 1e-8 * alpha * dphi + slack;
        } else {
          ok = th1 <= (1 - 1e-5) * th0 || phi1 <= phi0 - 1e-8 * th0 + slack;
        }
      }
      if (ok) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (accepted && !f_type && !negligible) filter.emplace_back((1 - 1e-5) * th0, phi0 - 1e-8 * th0);
    if (!accepted) {
      // Fall back to the exact-penalty merit.
      alpha = amax;
      for (int ls = 0; ls < 60 && alpha > 1e-16; ++ls) {
        if (try_point(alpha)) {
          auto [phi1, th1] = barrier_merit(x_trial, s_trial, f_trial, c_trial);
          if (phi1 + nu * th1 <= phi0 + nu * th0 + 1e-4 * alpha * std::min(dmerit, 0.0) + 1e-13 * std::abs(phi0)) {
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      filter.clear();
    }
    if (!accepted) {
      out.line_search_failed = true;
      break;
    }

    double step = 0;
    for (std::size_t k = 0; k < nf; ++k) step = std::max(step, std::abs(alpha * dx[k]));
    x.swap(x_trial);
    s.swap(s_trial);
    c.swap(c_trial);
    f = f_trial;
    for (std::size_t i = 0; i < me; ++i) y[i] += alpha * dy[i];
    for (std::size_t i = 0; i < mi; ++i) y[me + i] += az * dy[me + i];
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t i = fidx[k];
      if (has_lo(i)) {
        zl[i] += az * dzl[k];
        const double gap = x[i] - lo[i];
        zl[i] = std::clamp(zl[i], mu / (kappa_sigma * gap), kappa_sigma * mu / gap);
      }
      if (has_hi(i)) {
        zu[i] += az * dzu[k];
        const double gap = hi[i] - x[i];
        zu[i] = std::clamp(zu[i], mu / (kappa_sigma * gap), kappa_sigma * mu / gap);
      }
    }
    for (std::size_t i = 0; i < mi; ++i)
      y[me + i] = std::clamp(y[me + i], mu / (kappa_sigma * s[i]), kappa_sigma * mu / s[i]);
    // Keep slacks consistent with satisfied inequalities.
    for (std::size_t i = 0; i < mi; ++i) s[i] = std::max(s[i], -c[me + i]);

    if (st.on_iteration) st.on_iteration({iter, f, constraint_violation(inst, c), step, mu, alpha, amax, delta});
  }

  sol.x = x;
  sol.objective = f;
  sol.violation = constraint_violation(inst, c);
  sol.kkt_residual = kkt0;
  sol.iterations = iter;
  if (sol.violation > st.feasibility_tol)
    sol.status = SolveStatus::Infeasible;
  else if (converged)
    sol.status = SolveStatus::OptimalLocal;
  else if (iter >= st.max_iterations)
    sol.status = SolveStatus::IterationLimit;
  else
    sol.status = SolveStatus::FeasibleSuboptimal;
  return out;
}

}  // namespace detail

inline Solution solve_single(const NlpInstance& inst, std::span<const double> x0,
                             const SolverSettings& settings) {
  const std::size_t n = inst.dimension();
  if (x0.size() != n) throw std::invalid_argument("initial point has wrong dimension");
  if (!(settings.feasibility_tol > 0 && settings.optimality_tol > 0))
    throw std::invalid_argument("solver tolerances must be positive");
  const auto lo = inst.lower();
  const auto hi = inst.upper();
  for (std::size_t i = 0; i < n; ++i)
    if (!(x0[i] >= lo[i] && x0[i] <= hi[i]))
      throw std::invalid_argument("initial point outside the variable bounds");

  Solution first = detail::interior_point(inst, x0, settings).sol;
  if (first.violation <= settings.feasibility_tol) return first;

  // Restoration: minimize the l1 violation, then resume from that point.
  detail::ElasticNlp elastic(inst, first.x, 1e-6);
  SolverSettings rs = settings;
  rs.on_iteration = nullptr;
  const Solution r = detail::interior_point(elastic, elastic.start(first.x), rs).sol;
  std::vector<double> xr(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::size_t i = 0; i < n; ++i) xr[i] = std::clamp(xr[i], lo[i], hi[i]);
  std::vector<double> c(inst.num_constraints());
  inst.evaluate(xr, c);
  Solution best = first;
  best.restored = true;
  if (constraint_violation(inst, c) < best.violation) {
    best.x = xr;
    best.objective = inst.evaluate(xr, c);
    best.violation = constraint_violation(inst, c);
  }
  if (best.violation <= 10 * settings.feasibility_tol || r.objective <= 1e-3) {
    Solution again = detail::interior_point(inst, xr, settings).sol;
    again.restored = true;
    again.iterations += first.iterations + r.iterations;
    if (again.violation <= settings.feasibility_tol) return again;
    if (again.violation < best.violation) best = again;
  }
  best.iterations = std::max(best.iterations, first.iterations + r.iterations);
  best.status = SolveStatus::Infeasible;
  return best;
}

// Uniform start inside the box; a coordinate with an infinite bound is drawn
// within one unit of its finite bound, or set to zero when both are infinite.
// The instance may then fill dependent coordinates.
inline std::vector<double> random_start(const NlpInstance& inst, std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto lo = inst.lower();
  const auto hi = inst.upper();
  std::vector<double> x(inst.dimension());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = lo[i], b = hi[i];
    if (!std::isfinite(a) && !std::isfinite(b)) {
      x[i] = 0.0;
      continue;
    }
    if (!std::isfinite(a)) a = b - 1.0;
    if (!std::isfinite(b)) b = a + 1.0;
    x[i] = a + (b - a) * unit(rng);
  }
  inst.complete_start(x);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  return x;
}

// True when `a` is preferable to `b`: feasible beats infeasible, then lower
// objective (feasible) or lower violation (infeasible). Ties keep the earlier start.
inline bool better_solution(const Solution& a, const Solution& b) {
  if (a.feasible() != b.feasible()) return a.feasible();
  if (a.feasible()) return a.objective < b.objective;
  return a.violation < b.violation;
}

// Caller-supplied starts are tried first, then `settings.multistart` seeded
// uniform starts; the best result is returned.
inline Solution solve_multistart(const NlpInstance& inst, const SolverSettings& settings,
                                 std::span<const std::vector<double>> extra_starts = {}) {
  if (settings.multistart < 1 && extra_starts.empty())
    throw std::invalid_argument("multistart count must be at least 1");
  const int e = static_cast<int>(extra_starts.size());
  const int total = e + std::max(0, settings.multistart);
  std::vector<Solution> results(static_cast<std::size_t>(total));
  auto run = [&](int k) {
    const std::vector<double> x0 =
        k < e ? extra_starts[static_cast<std::size_t>(k)] : random_start(inst, settings.seed, k - e);
    Solution s = solve_single(inst, x0, settings);
    s.start_index = k;
    results[static_cast<std::size_t>(k)] = std::move(s);
  };
  const int threads = std::clamp(settings.threads, 1, total);
  if (threads == 1) {
    for (int k = 0; k < total; ++k) run(k);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int k = t; k < total; k += threads) run(k);
      });
    for (auto& th : pool) th.join();
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < results.size(); ++k)
    if (better_solution(results[k], results[best])) best = k;
  return results[best];
}

inline void write_iteration_csv_header(std::ostream& os) {
  os << "iteration,objective,violation,step_norm\n";
}

inline std::function<void(const IterationRecord&)> iteration_csv_logger(std::ostream& os) {
  return [&os](const IterationRecord& r) {
    os << r.iteration << ',' << r.objective << ',' << r.violation << ',' << r.step_norm << '\n';
  };
}

}  // namespace spotmpc
