#pragma once

// Smooth constrained NLP solver.
//
//   min f(x)  s.t.  c_E(x) = 0,  g_lo <= g(x) <= g_hi,  x_lo <= x <= x_hi
//
// Inequalities receive slack variables s (g(x) - s = 0, g_lo <= s <= g_hi),
// leaving equalities r(y) = 0 and simple bounds on y = (x, s). A primal-dual
// interior-point method follows a monotone barrier path; each Newton system
//
//   [ W + Sigma + dw I   A^T   ] [dy]     [ grad phi_mu + A^T lambda ]
//   [ A                 -dc I  ] [dl] = - [ r                        ]
//
// is factorised by a sparse LDL^T (dense Bunch-Kaufman as fallback) and
// regularised until its inertia is (n + m_I, m, 0). Steps in (y, lambda)
// are globalised by a backtracking line search on the augmented Lagrangian
// phi_mu + lambda^T r + rho/2 |r|^2, with one second-order correction.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "quietpath/errors.hpp"

namespace quietpath {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Symmetric rank-one term weight * direction * direction^T.
struct LowRankTerm {
  double weight = 0.0;
  Vector direction;
};

/// Callback description of an NLP. Constraint rows are ordered equalities
/// first, then inequalities. `hessian(x, sigma, lambda, H)` must overwrite H
/// (n x n, symmetric) with sigma * Hess f + sum_i lambda_i Hess c_i; when it
/// is left empty the solver differences the Lagrangian gradient instead.
struct NlpProblem {
  Index num_variables = 0;
  Index num_equalities = 0;
  Index num_inequalities = 0;
  Vector variable_lower;
  Vector variable_upper;
  Vector inequality_lower;
  Vector inequality_upper;

  std::function<double(const Vector&)> objective;
  std::function<void(const Vector&, Vector&)> gradient;
  std::function<void(const Vector&, Vector&)> constraints;
  std::function<void(const Vector&, SparseMatrix&)> jacobian;
  std::function<void(const Vector&, double, const Vector&, Matrix&)> hessian;
  // Optional split form of `hessian`: H = base + sum_t weight_t d_t d_t^T with
  // a sparse base. Lets the solver keep the KKT factor sparse.
  std::function<void(const Vector&, double, const Vector&, Matrix&,
                     std::vector<LowRankTerm>&)>
      hessian_split;
  std::vector<std::pair<Index, Index>> jacobian_pattern;
  // Callbacks may be invoked concurrently on distinct points.
  bool reentrant = false;

  Index num_constraints() const { return num_equalities + num_inequalities; }

  void validate() const {
    const Index n = num_variables;
    if (n <= 0) throw ValidationError("nlp: no variables");
    if (variable_lower.size() != n || variable_upper.size() != n) {
      throw ValidationError("nlp: variable bound sizes do not match");
    }
    if (inequality_lower.size() != num_inequalities ||
        inequality_upper.size() != num_inequalities) {
      throw ValidationError("nlp: inequality bound sizes do not match");
    }
    for (Index i = 0; i < n; ++i) {
      if (!(variable_lower[i] <= variable_upper[i])) {
        throw ValidationError("nlp: variable bounds out of order at " +
                              std::to_string(i));
      }
    }
    for (Index i = 0; i < num_inequalities; ++i) {
      if (!(inequality_lower[i] <= inequality_upper[i])) {
        throw ValidationError("nlp: inequality bounds out of order at " +
                              std::to_string(i));
      }
    }
    if (!objective || !gradient) throw ValidationError("nlp: missing objective");
    if (num_constraints() > 0 && (!constraints || !jacobian)) {
      throw ValidationError("nlp: missing constraint callbacks");
    }
  }
};

struct SolverOptions {
  int max_iterations = 1000;
  double feasibility_tolerance = 1e-6;
  double optimality_tolerance = 1e-6;
  double initial_barrier = 0.1;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
  // Initial points are moved at least this far (relative) inside the bounds.
  double bound_push = 1e-2;
  double time_limit = kInfinity;  // seconds
  // Reserved for randomised strategies; the algorithm is deterministic and
  // does not draw from it.
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;
  bool record_history = true;

  void validate() const {
    if (!(feasibility_tolerance > 0.0) || !(optimality_tolerance > 0.0)) {
      throw ValidationError("solver: tolerances must be positive");
    }
    if (!(initial_barrier > 0.0)) {
      throw ValidationError("solver: initial barrier must be positive");
    }
    if (!(backtrack > 0.0 && backtrack < 1.0) || !(armijo > 0.0 && armijo < 0.5)) {
      throw ValidationError("solver: line-search parameters out of range");
    }
    if (max_iterations < 1 || max_backtracks < 1) {
      throw ValidationError("solver: iteration limits must be positive");
    }
    if (!(bound_push > 0.0 && bound_push < 0.5)) {
      throw ValidationError("solver: bound_push must lie in (0, 0.5)");
    }
  }
};

enum class SolveStatus { optimal, infeasible, iteration_limit, error };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::iteration_limit: return "iteration-limit";
    case SolveStatus::error: return "error";
  }
  return "unknown";
}

/// One accepted iterate. `merit` is the augmented-Lagrangian merit for the
/// (barrier, penalty) pair in force; while both stay fixed it never increases
/// by more than 1e-13 * (1 + |merit|), the round-off allowance.
struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double feasibility = 0.0;
  double optimality = 0.0;
  double step = 0.0;
  double merit = 0.0;
  double barrier = 0.0;
  double penalty = 0.0;
  double regularization = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::error;
  double objective = 0.0;
  double feasibility_error = kInfinity;
  double optimality_error = kInfinity;
  int iterations = 0;
  double wall_time = 0.0;
  double barrier = 0.0;
  std::string message;
  std::vector<IterationRecord> history;
};

struct SolveResult {
  Vector x;
  Vector multipliers;  // one per constraint row, Lagrangian f + lambda^T c
  SolveReport report;
};

struct KktResiduals {
  double feasibility = 0.0;
  double optimality = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
};

/// Feasibility and optimality errors of (x, multipliers) for the Lagrangian
/// f + lambda^T c. Inequality multipliers are positive when the upper bound
/// binds and negative when the lower bound binds. Bound multipliers are
/// implicit: stationarity is measured by the projected Lagrangian gradient
/// |x - P(x - grad L)|, divided by max(1, mean|lambda| / 100).
inline KktResiduals kkt_residuals(const NlpProblem& p, const Vector& x,
                                  const Vector& multipliers) {
  const Index n = p.num_variables;
  const Index me = p.num_equalities;
  const Index mi = p.num_inequalities;
  const Index m = me + mi;
  if (x.size() != n || multipliers.size() != m) {
    throw ValidationError("kkt_residuals: dimension mismatch");
  }
  KktResiduals r;
  for (Index i = 0; i < n; ++i) {
    r.feasibility = std::max({r.feasibility, p.variable_lower[i] - x[i],
                              x[i] - p.variable_upper[i]});
  }
  Vector grad(n);
  p.gradient(x, grad);
  if (m > 0) {
    Vector c(m);
    p.constraints(x, c);
    SparseMatrix J;
    p.jacobian(x, J);
    for (Index i = 0; i < me; ++i) {
      r.feasibility = std::max(r.feasibility, std::abs(c[i]));
    }
    for (Index i = 0; i < mi; ++i) {
      const double g = c[me + i];
      const double lo = p.inequality_lower[i];
      const double hi = p.inequality_upper[i];
      r.feasibility = std::max({r.feasibility, lo - g, g - hi});
      const double lam = multipliers[me + i];
      double comp = 0.0;
      if (lam > 0.0) {
        comp = std::isfinite(hi) ? std::min(lam, std::abs(hi - g)) : lam;
      } else if (lam < 0.0) {
        comp = std::isfinite(lo) ? std::min(-lam, std::abs(g - lo)) : -lam;
      }
      r.complementarity = std::max(r.complementarity, comp);
    }
    grad += J.transpose() * multipliers;
  }
  const double scale =
      m > 0 ? std::max(1.0, multipliers.lpNorm<1>() / static_cast<double>(m) / 100.0)
            : 1.0;
  for (Index i = 0; i < n; ++i) {
    const double projected =
        std::clamp(x[i] - grad[i], p.variable_lower[i], p.variable_upper[i]);
    r.stationarity = std::max(r.stationarity, std::abs(x[i] - projected));
  }
  r.stationarity /= scale;
  r.complementarity /= scale;
  r.feasibility = std::max(r.feasibility, 0.0);
  r.optimality = r.stationarity + r.complementarity;
  return r;
}

/// Central-difference Hessian of the Lagrangian, used when the problem does
/// not provide one.
inline void finite_difference_hessian(const NlpProblem& p, const Vector& x,
                                      double sigma, const Vector& lambda,
                                      Matrix& H) {
  const Index n = p.num_variables;
  const Index m = p.num_constraints();
  auto lagrangian_gradient = [&](const Vector& at) {
    Vector g(n);
    p.gradient(at, g);
    g *= sigma;
    if (m > 0) {
      SparseMatrix J;
      p.jacobian(at, J);
      g += J.transpose() * lambda;
    }
    return g;
  };
  H.resize(n, n);
  Vector xp = x;
  for (Index j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    const Vector gp = lagrangian_gradient(xp);
    xp[j] = x[j] - h;
    const Vector gm = lagrangian_gradient(xp);
    xp[j] = x[j];
    H.col(j) = (gp - gm) / (2.0 * h);
  }
  H = 0.5 * (H + H.transpose()).eval();
}

namespace detail {

extern "C" {
void dsytrf_(const char* uplo, const int* n, double* a, const int* lda,
             int* ipiv, double* work, const int* lwork, int* info);
void dsytrs_(const char* uplo, const int* n, const int* nrhs, const double* a,
             const int* lda, const int* ipiv, double* b, const int* ldb,
             int* info);
}

struct Inertia {
  Index positive = 0;
  Index negative = 0;
  Index zero = 0;
};

/// Dense symmetric indefinite LDL^T (Bunch-Kaufman) with inertia.
class SymmetricIndefinite {
 public:
  bool factor(const Matrix& a) {
    factors_ = a;
    const int n = static_cast<int>(a.rows());
    pivots_.assign(static_cast<std::size_t>(n), 0);
    int info = 0;
    int lwork = -1;
    double query = 0.0;
    dsytrf_("L", &n, factors_.data(), &n, pivots_.data(), &query, &lwork, &info);
    lwork = std::max(1, static_cast<int>(query));
    work_.resize(static_cast<std::size_t>(lwork));
    dsytrf_("L", &n, factors_.data(), &n, pivots_.data(), work_.data(), &lwork,
            &info);
    if (info < 0) throw std::logic_error("dsytrf: invalid argument");
    count_inertia();
    return inertia_.zero == 0;
  }

  const Inertia& inertia() const { return inertia_; }

  Vector solve(const Vector& b) const {
    Vector x = b;
    const int n = static_cast<int>(factors_.rows());
    const int nrhs = 1;
    int info = 0;
    dsytrs_("L", &n, &nrhs, factors_.data(), &n, pivots_.data(), x.data(), &n,
            &info);
    return x;
  }

 private:
  void count_inertia() {
    inertia_ = {};
    const Index n = factors_.rows();
    auto classify = [&](double v) {
      if (v == 0.0 || !std::isfinite(v)) {
        ++inertia_.zero;
      } else if (v > 0.0) {
        ++inertia_.positive;
      } else {
        ++inertia_.negative;
      }
    };
    for (Index k = 0; k < n; ++k) {
      if (pivots_[k] > 0) {
        classify(factors_(k, k));
        continue;
      }
      // 2 x 2 block in rows k, k + 1.
      const double a = factors_(k, k);
      const double b = factors_(k + 1, k);
      const double c = factors_(k + 1, k + 1);
      const double mean = 0.5 * (a + c);
      const double radius = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      classify(mean + radius);
      classify(mean - radius);
      ++k;
    }
  }

  Matrix factors_;
  std::vector<int> pivots_;
  std::vector<double> work_;
  Inertia inertia_;
};

/// KKT factorization: sparse LDL^T without pivoting after a fill-reducing
/// ordering. A tiny quasi-definite shift (+ on the first `primal` rows, - on
/// the rest) keeps every pivot nonzero; iterative refinement against the
/// unshifted matrix removes it from the solution. Rank-one Hessian terms
/// w d d^T enter as extra rows [d^T, -1/w] so the factor stays sparse; their
/// pivots are removed from the reported inertia (Sylvester on the Schur
/// complement). Falls back to dense Bunch-Kaufman when refinement fails.
class KktFactor {
 public:
  static constexpr double kShift = 1e-9;

  bool factor(const Matrix& k, Index primal, const std::vector<LowRankTerm>& terms) {
    dense_mode_ = false;
    dense_ready_ = false;
    dense_ = k;
    terms_ = &terms;
    primal_ = primal;
    dim_ = k.rows();
    const Index extra = static_cast<Index>(terms.size());
    const Index total = dim_ + extra;
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(8 * total));
    for (Index col = 0; col < dim_; ++col) {
      const double shift = col < primal_ ? kShift : -kShift;
      entries.emplace_back(col, col, k(col, col) + shift);
      for (Index row = col + 1; row < dim_; ++row) {
        if (k(row, col) != 0.0) entries.emplace_back(row, col, k(row, col));
      }
    }
    Inertia aux;
    for (Index t = 0; t < extra; ++t) {
      const LowRankTerm& term = terms[static_cast<std::size_t>(t)];
      const Index row = dim_ + t;
      for (Index i = 0; i < term.direction.size(); ++i) {
        if (term.direction[i] != 0.0) entries.emplace_back(row, i, term.direction[i]);
      }
      entries.emplace_back(row, row, -1.0 / term.weight);
      ++(term.weight < 0.0 ? aux.positive : aux.negative);
    }
    sparse_.resize(total, total);
    sparse_.setFromTriplets(entries.begin(), entries.end());
    sparse_.makeCompressed();
    if (!same_pattern()) {
      ldlt_.analyzePattern(sparse_);
      outer_.assign(sparse_.outerIndexPtr(), sparse_.outerIndexPtr() + total + 1);
      inner_.assign(sparse_.innerIndexPtr(), sparse_.innerIndexPtr() + sparse_.nonZeros());
    }
    ldlt_.factorize(sparse_);
    if (ldlt_.info() == Eigen::Success) {
      const Vector d = ldlt_.vectorD();
      inertia_ = {};
      bool finite = true;
      for (Index i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i]) || d[i] == 0.0) {
          finite = false;
          break;
        }
        ++(d[i] > 0.0 ? inertia_.positive : inertia_.negative);
      }
      if (finite) {
        inertia_.positive -= aux.positive;
        inertia_.negative -= aux.negative;
        return true;
      }
    }
    return dense_factor();
  }

  const Inertia& inertia() const {
    return dense_mode_ ? fallback_.inertia() : inertia_;
  }

  Vector solve(const Vector& b) {
    if (dense_mode_) return fallback_.solve(b);
    Vector rhs = Vector::Zero(sparse_.rows());
    rhs.head(dim_) = b;
    const double tol = 1e-12 * (1.0 + b.cwiseAbs().maxCoeff());
    Vector x = ldlt_.solve(rhs);
    for (int pass = 0; pass < 10 && x.allFinite(); ++pass) {
      const Vector r = residual(rhs, x);
      if (r.cwiseAbs().maxCoeff() <= tol) return x.head(dim_);
      x += ldlt_.solve(r);
    }
    if (x.allFinite() && residual(rhs, x).cwiseAbs().maxCoeff() <= 1e6 * tol) {
      return x.head(dim_);
    }
    dense_factor();
    return fallback_.solve(b);
  }

 private:
  // b - K x for the unshifted K.
  Vector residual(const Vector& b, const Vector& x) const {
    Vector r = b - Vector(sparse_.selfadjointView<Eigen::Lower>() * x);
    r.head(primal_) += kShift * x.head(primal_);
    r.segment(primal_, dim_ - primal_) -= kShift * x.segment(primal_, dim_ - primal_);
    return r;
  }

  bool dense_factor() {
    dense_mode_ = true;
    if (!dense_ready_) {
      for (const LowRankTerm& term : *terms_) {
        const Index n = term.direction.size();
        dense_.topLeftCorner(n, n).noalias() +=
            term.weight * term.direction * term.direction.transpose();
      }
      dense_ready_ = true;
    }
    return fallback_.factor(dense_);
  }

  bool same_pattern() const {
    const auto outer = sparse_.outerIndexPtr();
    const auto inner = sparse_.innerIndexPtr();
    return outer_.size() == static_cast<std::size_t>(sparse_.outerSize() + 1) &&
           inner_.size() == static_cast<std::size_t>(sparse_.nonZeros()) &&
           std::equal(outer_.begin(), outer_.end(), outer) &&
           std::equal(inner_.begin(), inner_.end(), inner);
  }

  using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower,
                                    Eigen::AMDOrdering<int>>;
  Matrix dense_;
  bool dense_ready_ = false;
  const std::vector<LowRankTerm>* terms_ = nullptr;
  Index primal_ = 0;
  Index dim_ = 0;
  SparseMatrix sparse_;
  Ldlt ldlt_;
  std::vector<int> outer_;
  std::vector<int> inner_;
  bool dense_mode_ = false;
  Inertia inertia_;
  SymmetricIndefinite fallback_;
};

/// Relative slack of the merit decrease test; see IterationRecord.
inline constexpr double kMeritRounding = 1e-13;

class InteriorPointSolver {
 public:
  InteriorPointSolver(const NlpProblem& p, const SolverOptions& o)
      : p_(p),
        opts_(o),
        n_(p.num_variables),
        me_(p.num_equalities),
        mi_(p.num_inequalities),
        m_(me_ + mi_),
        ny_(n_ + mi_) {
    lower_.resize(ny_);
    upper_.resize(ny_);
    lower_ << p.variable_lower, p.inequality_lower;
    upper_ << p.variable_upper, p.inequality_upper;
  }

  SolveResult run(const Vector& x0) {
    start_ = std::chrono::steady_clock::now();
    SolveResult result;
    result.report.status = SolveStatus::error;
    result.multipliers = Vector::Zero(m_);
    if (x0.size() != n_) {
      result.report.message = "initial point has wrong dimension";
      result.x = x0;
      return result;
    }
    for (Index i = 0; i < ny_; ++i) {
      if (lower_[i] == upper_[i]) {
        result.report.message = "fixed variables are not supported; use an equality";
        result.x = x0;
        return result;
      }
    }

    Vector y(ny_);
    y.head(n_) = push_inside(x0, 0);
    Point cur;
    try {
      if (mi_ > 0) {
        Vector c(m_);
        p_.constraints(y.head(n_), c);
        y.tail(mi_) = push_inside(c.tail(mi_), n_);
      }
      cur = evaluate(y);
    } catch (const std::exception& e) {
      result.report.message = std::string("evaluation failed at the initial point: ") + e.what();
      result.x = y.head(n_);
      finish(result.report);
      return result;
    }

    zl_ = Vector::Zero(ny_);
    zu_ = Vector::Zero(ny_);
    for (Index i = 0; i < ny_; ++i) {
      if (std::isfinite(lower_[i])) zl_[i] = 1.0;
      if (std::isfinite(upper_[i])) zu_[i] = 1.0;
    }
    mu_ = opts_.initial_barrier;
    lambda_ = initial_multipliers(cur);

    // Complementarity gaps shrink like sqrt(mu) on weakly active bounds.
    const double tol = std::min(opts_.feasibility_tolerance, opts_.optimality_tolerance);
    const double mu_min = 0.1 * tol * tol;
    Vector best_x;
    Vector best_lambda;
    double best_objective = kInfinity;
    SolveStatus status = SolveStatus::iteration_limit;
    std::string message;
    std::string last_failure;
    int failures = 0;

    for (;;) {
      KktResiduals kkt;
      try {
        kkt = kkt_residuals(p_, cur.y.head(n_), lambda_);
      } catch (const std::exception& e) {
        status = SolveStatus::error;
        message = e.what();
        break;
      }
      if (kkt.feasibility <= opts_.feasibility_tolerance && cur.f < best_objective) {
        best_objective = cur.f;
        best_x = cur.y.head(n_);
        best_lambda = lambda_;
      }
      if (kkt.feasibility <= opts_.feasibility_tolerance &&
          kkt.optimality <= opts_.optimality_tolerance) {
        status = SolveStatus::optimal;
        break;
      }
      if (iterations_ >= opts_.max_iterations) {
        message = "iteration limit reached";
        break;
      }
      if (elapsed() > opts_.time_limit) {
        message = "time limit reached";
        break;
      }

      while (mu_ > mu_min && barrier_error(cur) <= 10.0 * mu_) {
        mu_ = std::max(mu_min, std::min(0.2 * mu_, std::pow(mu_, 1.5)));
      }

      Step step;
      try {
        step = newton_step(cur);
      } catch (const std::exception& e) {
        status = SolveStatus::error;
        message = e.what();
        break;
      }
      if (!step.ok) {
        status = SolveStatus::error;
        message = "Newton system could not be regularised";
        break;
      }

      const LineSearch ls = line_search(cur, step);
      ++iterations_;
      if (!ls.accepted) {
        if (!ls.failure.empty()) last_failure = ls.failure;
        boost_ = std::max(1e-4, 100.0 * std::max(boost_, regularization_));
        if (++failures >= 8) {
          status = kkt.feasibility <= opts_.feasibility_tolerance
                       ? SolveStatus::iteration_limit
                       : SolveStatus::infeasible;
          message = "line search failed repeatedly";
          if (!last_failure.empty()) message += " (" + last_failure + ")";
          break;
        }
        record(cur, kkt.optimality, 0.0);
        continue;
      }
      failures = 0;
      boost_ = 0.0;
      const double tau = std::max(0.99, 1.0 - mu_);
      const double alpha_z = std::min(fraction_to_boundary(zl_, step.dzl, tau),
                                      fraction_to_boundary(zu_, step.dzu, tau));
      zl_ += alpha_z * step.dzl;
      zu_ += alpha_z * step.dzu;
      lambda_ += ls.alpha * step.dlambda;
      cur = ls.point;
      safeguard_bound_multipliers(cur.y);
      record(cur, kkt.optimality, ls.alpha);
    }

    result.x = cur.y.head(n_);
    result.multipliers = lambda_;
    if (status != SolveStatus::optimal && best_x.size() == n_) {
      result.x = best_x;
      result.multipliers = best_lambda;
    }
    result.report.status = status;
    result.report.message = message;
    try {
      const KktResiduals kkt = kkt_residuals(p_, result.x, result.multipliers);
      result.report.objective = p_.objective(result.x);
      result.report.feasibility_error = kkt.feasibility;
      result.report.optimality_error = kkt.optimality;
    } catch (const std::exception& e) {
      result.report.status = SolveStatus::error;
      result.report.message = e.what();
    }
    if (result.report.status == SolveStatus::optimal &&
        (result.report.feasibility_error > opts_.feasibility_tolerance ||
         result.report.optimality_error > opts_.optimality_tolerance)) {
      result.report.status = SolveStatus::iteration_limit;
    }
    result.report.history = std::move(history_);
    finish(result.report);
    return result;
  }

 private:
  struct Point {
    Vector y;
    double f = 0.0;
    Vector grad_f;
    Vector c;  // all constraint rows at x
    Vector r;  // [c_E; g - s]
    SparseMatrix J;
  };

  struct Step {
    bool ok = false;
    Vector dy;
    Vector dlambda;
    Vector dzl;
    Vector dzu;
    Vector grad_phi;
    Vector rhs_dual;  // grad_phi + A^T lambda
    double slope = 0.0;  // directional derivative of the merit
    double alpha_max = 1.0;
  };

  struct LineSearch {
    bool accepted = false;
    double alpha = 0.0;
    Point point;
    std::string failure;
  };

  void finish(SolveReport& report) const {
    report.iterations = iterations_;
    report.barrier = mu_;
    report.wall_time = elapsed();
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

  // Moves v (entries offset..offset+size of y) strictly inside its bounds.
  Vector push_inside(const Vector& v, Index offset) const {
    Vector out = v;
    const double k1 = opts_.bound_push;
    for (Index i = 0; i < v.size(); ++i) {
      const double lo = lower_[offset + i];
      const double hi = upper_[offset + i];
      const double width = hi - lo;
      if (std::isfinite(lo)) {
        const double push = std::min(k1 * std::max(1.0, std::abs(lo)), k1 * width);
        out[i] = std::max(out[i], lo + push);
      }
      if (std::isfinite(hi)) {
        const double push = std::min(k1 * std::max(1.0, std::abs(hi)), k1 * width);
        out[i] = std::min(out[i], hi - push);
      }
    }
    return out;
  }

  Point evaluate(const Vector& y) const {
    Point pt;
    pt.y = y;
    const Vector x = y.head(n_);
    pt.f = p_.objective(x);
    pt.grad_f.resize(n_);
    p_.gradient(x, pt.grad_f);
    pt.c.resize(m_);
    if (m_ > 0) {
      p_.constraints(x, pt.c);
      p_.jacobian(x, pt.J);
    }
    pt.r = pt.c;
    if (mi_ > 0) pt.r.tail(mi_) -= y.tail(mi_);
    if (!std::isfinite(pt.f) || !pt.r.allFinite() || !pt.grad_f.allFinite()) {
      throw DomainError("non-finite objective or constraint value");
    }
    return pt;
  }

  // A v for A = [J, (0; -I)].
  Vector constraint_product(const Point& pt, const Vector& v) const {
    Vector out = Vector::Zero(m_);
    if (m_ == 0) return out;
    out = pt.J * v.head(n_);
    if (mi_ > 0) out.tail(mi_) -= v.tail(mi_);
    return out;
  }

  // A^T v for A = [J, (0; -I)].
  Vector transpose_product(const Point& pt, const Vector& v) const {
    Vector out = Vector::Zero(ny_);
    if (m_ == 0) return out;
    out.head(n_) = pt.J.transpose() * v;
    if (mi_ > 0) out.tail(mi_) = -v.tail(mi_);
    return out;
  }

  double barrier_value(const Point& pt) const {
    double phi = pt.f;
    for (Index i = 0; i < ny_; ++i) {
      if (std::isfinite(lower_[i])) phi -= mu_ * std::log(pt.y[i] - lower_[i]);
      if (std::isfinite(upper_[i])) phi -= mu_ * std::log(upper_[i] - pt.y[i]);
    }
    return phi;
  }

  // Augmented Lagrangian of the barrier problem, a function of (y, lambda).
  double merit(const Point& pt, const Vector& lambda) const {
    if (m_ == 0) return barrier_value(pt);
    return barrier_value(pt) + lambda.dot(pt.r) + 0.5 * penalty_ * pt.r.squaredNorm();
  }

  Vector barrier_gradient(const Point& pt) const {
    Vector g = Vector::Zero(ny_);
    g.head(n_) = pt.grad_f;
    for (Index i = 0; i < ny_; ++i) {
      if (std::isfinite(lower_[i])) g[i] -= mu_ / (pt.y[i] - lower_[i]);
      if (std::isfinite(upper_[i])) g[i] += mu_ / (upper_[i] - pt.y[i]);
    }
    return g;
  }

  double barrier_error(const Point& pt) const {
    const Vector dual = Vector(Vector::Zero(ny_)) + transpose_product(pt, lambda_);
    Vector stat = dual - zl_ + zu_;
    stat.head(n_) += pt.grad_f;
    const double sum = lambda_.lpNorm<1>() + zl_.lpNorm<1>() + zu_.lpNorm<1>();
    const double count = static_cast<double>(m_ + 2 * ny_);
    const double sd = std::max(100.0, sum / count) / 100.0;
    double comp = 0.0;
    double zsum = zl_.lpNorm<1>() + zu_.lpNorm<1>();
    for (Index i = 0; i < ny_; ++i) {
      if (std::isfinite(lower_[i])) {
        comp = std::max(comp, std::abs((pt.y[i] - lower_[i]) * zl_[i] - mu_));
      }
      if (std::isfinite(upper_[i])) {
        comp = std::max(comp, std::abs((upper_[i] - pt.y[i]) * zu_[i] - mu_));
      }
    }
    const double sc = std::max(100.0, zsum / std::max(1.0, 2.0 * ny_)) / 100.0;
    const double feas = m_ > 0 ? pt.r.lpNorm<Eigen::Infinity>() : 0.0;
    return std::max({stat.lpNorm<Eigen::Infinity>() / sd, feas, comp / sc});
  }

  Vector initial_multipliers(const Point& pt) {
    if (m_ == 0) return Vector::Zero(0);
    Matrix K = Matrix::Zero(ny_ + m_, ny_ + m_);
    K.topLeftCorner(ny_, ny_).diagonal().setOnes();
    fill_constraint_block(K, pt);
    SymmetricIndefinite f;
    if (!f.factor(K)) return Vector::Zero(m_);
    Vector rhs = Vector::Zero(ny_ + m_);
    rhs.head(n_) = -pt.grad_f;
    rhs.head(ny_) += zl_ - zu_;
    const Vector sol = f.solve(rhs);
    const Vector lam = sol.tail(m_);
    if (!lam.allFinite() || lam.lpNorm<Eigen::Infinity>() > 1e3) {
      return Vector::Zero(m_);
    }
    return lam;
  }

  void fill_constraint_block(Matrix& K, const Point& pt) const {
    for (Index col = 0; col < pt.J.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(pt.J, col); it; ++it) {
        K(ny_ + it.row(), it.col()) = it.value();
        K(it.col(), ny_ + it.row()) = it.value();
      }
    }
    for (Index i = 0; i < mi_; ++i) {
      K(ny_ + me_ + i, n_ + i) = -1.0;
      K(n_ + i, ny_ + me_ + i) = -1.0;
    }
  }

  Step newton_step(const Point& pt) {
    Step st;
    Matrix W(n_, n_);
    const Vector x = pt.y.head(n_);
    low_rank_.clear();
    if (p_.hessian_split) {
      p_.hessian_split(x, 1.0, lambda_, W, low_rank_);
      for (const LowRankTerm& t : low_rank_) {
        if (t.direction.size() > n_ || !t.direction.allFinite() || !std::isfinite(t.weight)) {
          throw DomainError("invalid low-rank Hessian term");
        }
      }
      std::erase_if(low_rank_, [](const LowRankTerm& t) { return t.weight == 0.0; });
    } else if (p_.hessian) {
      p_.hessian(x, 1.0, lambda_, W);
    } else {
      finite_difference_hessian(p_, x, 1.0, lambda_, W);
    }
    if (!W.allFinite()) throw DomainError("non-finite Hessian");
    Vector sigma = Vector::Zero(ny_);
    for (Index i = 0; i < ny_; ++i) {
      if (std::isfinite(lower_[i])) sigma[i] += zl_[i] / (pt.y[i] - lower_[i]);
      if (std::isfinite(upper_[i])) sigma[i] += zu_[i] / (upper_[i] - pt.y[i]);
    }
    const Index dim = ny_ + m_;
    Matrix K0 = Matrix::Zero(dim, dim);
    K0.topLeftCorner(n_, n_) = W;
    K0.topLeftCorner(ny_, ny_).diagonal() += sigma;
    fill_constraint_block(K0, pt);

    st.grad_phi = barrier_gradient(pt);
    st.rhs_dual = st.grad_phi + transpose_product(pt, lambda_);
    Vector rhs(dim);
    rhs.head(ny_) = -st.rhs_dual;
    rhs.tail(m_) = -pt.r;

    // Inertia correction: the reduced Hessian must be positive definite.
    double dw = 0.0;
    double dc = 0.0;
    bool factored = false;
    for (int attempt = 0; attempt < 80; ++attempt) {
      Matrix K = K0;
      K.topLeftCorner(ny_, ny_).diagonal().array() += dw;
      if (m_ > 0) K.bottomRightCorner(m_, m_).diagonal().array() -= dc;
      factor_.factor(K, ny_, low_rank_);
      const Inertia& in = factor_.inertia();
      if (in.zero == 0 && in.positive == ny_ && in.negative == m_) {
        factored = true;
        break;
      }
      // Zero pivots or a failure under heavy shifts point at dependent
      // constraint rows.
      if (dc == 0.0 && m_ > 0 && (in.zero > 0 || dw > 1e4)) {
        dc = 1e-8 * std::pow(mu_, 0.25);
        if (in.zero > 0 && in.negative + in.zero >= m_ && dw == 0.0 && boost_ == 0.0) {
          continue;
        }
      }
      if (dw == 0.0) {
        dw = regularization_ == 0.0 ? std::max(1e-4, boost_)
                                    : std::max({1e-20, regularization_ / 3.0, boost_});
      } else {
        dw *= regularization_ == 0.0 ? 100.0 : 8.0;
      }
      if (dw > 1e40) break;
    }
    if (!factored) return st;
    if (dw > 0.0) {
      regularization_ = dw;
    } else if (boost_ == 0.0) {
      regularization_ = 0.0;
    }
    last_dw_ = dw;

    const Vector sol = factor_.solve(rhs);
    if (!sol.allFinite()) return st;
    st.dy = sol.head(ny_);
    st.dlambda = sol.tail(m_);
    st.dzl = Vector::Zero(ny_);
    st.dzu = Vector::Zero(ny_);
    for (Index i = 0; i < ny_; ++i) {
      if (std::isfinite(lower_[i])) {
        const double gap = pt.y[i] - lower_[i];
        st.dzl[i] = mu_ / gap - zl_[i] - zl_[i] / gap * st.dy[i];
      }
      if (std::isfinite(upper_[i])) {
        const double gap = upper_[i] - pt.y[i];
        st.dzu[i] = mu_ / gap - zu_[i] + zu_[i] / gap * st.dy[i];
      }
    }

    // Penalty update: the merit must decrease along (dy, dlambda) at least
    // by half the curvature of the step.
    Vector Hdy = K0.topLeftCorner(ny_, ny_).selfadjointView<Eigen::Lower>() * st.dy;
    for (const LowRankTerm& t : low_rank_) {
      const Index len = t.direction.size();
      Hdy.head(len) += t.weight * t.direction.dot(st.dy.head(len)) * t.direction;
    }
    const double curvature = std::max(0.0, st.dy.dot(Hdy));
    const Vector Ady = constraint_product(pt, st.dy);
    const double base = st.grad_phi.dot(st.dy) + lambda_.dot(Ady) +
                        (m_ > 0 ? pt.r.dot(st.dlambda) : 0.0);
    const double coupling = m_ > 0 ? pt.r.dot(Ady) : 0.0;  // ~ -|r|^2
    if (coupling < 0.0) {
      const double needed = std::max(1.0, (base + 0.5 * curvature) / -coupling);
      if (penalty_ < needed) {
        penalty_ = std::max(2.0 * needed, 2.0 * penalty_);
      } else if (penalty_ > 4.0 * needed) {
        penalty_ = std::max(2.0 * needed, std::sqrt(penalty_ * needed));
      }
    }
    st.slope = base + penalty_ * coupling;
    const double tau = std::max(0.99, 1.0 - mu_);
    st.alpha_max = fraction_to_boundary_y(pt.y, st.dy, tau);
    st.ok = true;
    return st;
  }

  // Largest alpha in (0, 1] with v + alpha dv >= (1 - tau) v (v > 0).
  static double fraction_to_boundary(const Vector& v, const Vector& dv, double tau) {
    double alpha = 1.0;
    for (Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0 && v[i] > 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
    }
    return alpha;
  }

  double fraction_to_boundary_y(const Vector& y, const Vector& dy, double tau) const {
    double alpha = 1.0;
    for (Index i = 0; i < ny_; ++i) {
      if (dy[i] < 0.0 && std::isfinite(lower_[i])) {
        alpha = std::min(alpha, -tau * (y[i] - lower_[i]) / dy[i]);
      }
      if (dy[i] > 0.0 && std::isfinite(upper_[i])) {
        alpha = std::min(alpha, tau * (upper_[i] - y[i]) / dy[i]);
      }
    }
    return alpha;
  }

  LineSearch line_search(const Point& pt, const Step& st) {
    LineSearch ls;
    const double m0 = merit(pt, lambda_);
    const double tau = std::max(0.99, 1.0 - mu_);
    double alpha = st.alpha_max;
    const double ynorm = 1.0 + pt.y.lpNorm<Eigen::Infinity>();
    // Merit differences below this are indistinguishable from round-off.
    const double rounding = kMeritRounding * (1.0 + std::abs(m0));
    for (int bt = 0; bt < opts_.max_backtracks; ++bt) {
      Point trial;
      bool evaluated = false;
      try {
        trial = evaluate(pt.y + alpha * st.dy);
        evaluated = true;
      } catch (const std::exception& e) {
        ls.failure = e.what();
      }
      if (evaluated) {
        const double mt = merit(trial, lambda_ + alpha * st.dlambda);
        if (mt <= m0 + opts_.armijo * alpha * st.slope + rounding) {
          ls.accepted = true;
          ls.alpha = alpha;
          ls.point = std::move(trial);
          return ls;
        }
        if (bt == 0 && m_ > 0) {
          // Second-order correction against the curvature of the constraints.
          Vector rhs(ny_ + m_);
          rhs.head(ny_) = -st.rhs_dual;
          rhs.tail(m_) = -(alpha * pt.r + trial.r);
          const Vector sol = factor_.solve(rhs);
          const Vector dsoc = sol.head(ny_);
          if (dsoc.allFinite()) {
            const double asoc = fraction_to_boundary_y(pt.y, dsoc, tau);
            try {
              Point corrected = evaluate(pt.y + asoc * dsoc);
              if (merit(corrected, lambda_ + alpha * st.dlambda) <= m0 + opts_.armijo * alpha * st.slope + rounding) {
                ls.accepted = true;
                ls.alpha = alpha;
                ls.point = std::move(corrected);
                return ls;
              }
            } catch (const std::exception& e) {
              ls.failure = e.what();
            }
          }
        }
      }
      if (alpha * st.dy.lpNorm<Eigen::Infinity>() <= 1e-14 * ynorm) break;
      alpha *= opts_.backtrack;
    }
    return ls;
  }

  // Keeps bound multipliers within a factor 1e10 of mu / gap.
  void safeguard_bound_multipliers(const Vector& y) {
    constexpr double kappa = 1e10;
    for (Index i = 0; i < ny_; ++i) {
      if (std::isfinite(lower_[i])) {
        const double base = mu_ / (y[i] - lower_[i]);
        zl_[i] = std::clamp(zl_[i], base / kappa, base * kappa);
      }
      if (std::isfinite(upper_[i])) {
        const double base = mu_ / (upper_[i] - y[i]);
        zu_[i] = std::clamp(zu_[i], base / kappa, base * kappa);
      }
    }
  }

  void record(const Point& pt, double optimality, double step) {
    IterationRecord rec;
    rec.iteration = iterations_;
    rec.objective = pt.f;
    rec.feasibility = m_ > 0 ? pt.r.lpNorm<Eigen::Infinity>() : 0.0;
    rec.optimality = optimality;
    rec.step = step;
    rec.merit = merit(pt, lambda_);
    rec.barrier = mu_;
    rec.penalty = penalty_;
    rec.regularization = last_dw_;
    if (opts_.log) {
      char line[320];
      std::snprintf(line, sizeof line,
                    "iter=%d objective=%.10e feasibility=%.3e optimality=%.3e "
                    "step=%.3e merit=%.10e barrier=%.3e penalty=%.3e "
                    "regularization=%.1e\n",
                    rec.iteration, rec.objective, rec.feasibility,
                    rec.optimality, rec.step, rec.merit, rec.barrier,
                    rec.penalty, rec.regularization);
      *opts_.log << line;
    }
    if (opts_.record_history) history_.push_back(rec);
  }

  const NlpProblem& p_;
  const SolverOptions& opts_;
  Index n_, me_, mi_, m_, ny_;
  Vector lower_, upper_;
  Vector lambda_, zl_, zu_;
  double mu_ = 0.1;
  double penalty_ = 1.0;
  double regularization_ = 0.0;
  double last_dw_ = 0.0;
  double boost_ = 0.0;
  int iterations_ = 0;
  KktFactor factor_;
  std::vector<LowRankTerm> low_rank_;
  std::vector<IterationRecord> history_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Solve from x0. Deterministic for fixed (problem, x0, options).
inline SolveResult solve(const NlpProblem& problem, const Vector& x0,
                         const SolverOptions& options = {}) {
  problem.validate();
  options.validate();
  detail::InteriorPointSolver solver(problem, options);
  return solver.run(x0);
}

}  // namespace quietpath
