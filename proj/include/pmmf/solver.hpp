// SPDX-License-Identifier: Apache-2.0
//
// Conjugate gradient and symmetrically preconditioned conjugate gradient,
// plus the standard preconditioners used for comparison: Jacobi, SSOR and
// incomplete Cholesky, and the factorization-based inverse square root.
// All preconditioners are given in split form M = K K^T as the pair
// (K^{-1}, K^{-T}), so the preconditioned system K^{-1} A K^{-T} stays
// symmetric and one PCG implementation covers every method.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmmf/blocked_matrix.hpp"
#include "pmmf/factorizer.hpp"
#include "pmmf/parallel.hpp"
#include "pmmf/rng.hpp"
#include "pmmf/transform_ops.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

struct LinearOperator {
  index_t n = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply_fn;

  void apply(std::span<const double> in, std::span<double> out) const { apply_fn(in, out); }
};

/// Wraps a blocked matrix as an operator; the matrix must outlive the result.
inline LinearOperator make_operator(const BlockedSparseMatrix& a) {
  const BlockedSparseMatrix* ptr = &a;
  return {a.dim(), [ptr](std::span<const double> in, std::span<double> out) {
            ptr->multiply_flat(in, out);
          }};
}

/// Split preconditioner M = K K^T given by the actions of K^{-1} and K^{-T}.
struct SplitPreconditioner {
  LinearOperator left;   // K^{-1}
  LinearOperator right;  // K^{-T}
};

inline SplitPreconditioner identity_preconditioner(index_t n) {
  auto copy = [](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  };
  return {{n, copy}, {n, copy}};
}

enum class PreconditionerKind { none, jacobi, ssor, ic, pmmf };

inline const char* preconditioner_name(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::none: return "none";
    case PreconditionerKind::jacobi: return "jacobi";
    case PreconditionerKind::ssor: return "ssor";
    case PreconditionerKind::ic: return "ic";
    case PreconditionerKind::pmmf: return "pmmf";
  }
  return "?";
}

struct SolveConfig {
  double tol = 1e-5;  // relative residual of the original system
  int max_iter = 100;
  PreconditionerKind preconditioner = PreconditionerKind::none;
  FactorizeParams pmmf;  // used when preconditioner == pmmf
  int rhs_count = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("SolveConfig: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("SolveConfig: max_iter < 1");
    if (rhs_count < 1) throw std::invalid_argument("SolveConfig: rhs_count < 1");
  }
};

struct SolveResult {
  std::vector<double> x;
  std::vector<double> residuals;  // residuals[k] = ||b - A x_k||, k = 0..iterations
  int iterations = 0;
  bool converged = false;
  bool breakdown = false;
  double wall_ms = 0.0;
};

namespace detail {

inline double vdot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double vnorm(std::span<const double> a) { return std::sqrt(vdot(a, a)); }

}  // namespace detail

/// CG on the split-preconditioned system K^{-1} A K^{-T} y = K^{-1} b with
/// x = K^{-T} y. Convergence is measured on the residual of the original
/// system so methods stay comparable.
inline SolveResult pcg_symmetric(const LinearOperator& a, std::span<const double> b,
                                 const SplitPreconditioner& m, const SolveConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(a.n);
  if (b.size() != n) throw std::invalid_argument("pcg_symmetric: rhs length mismatch");
  const auto start = std::chrono::steady_clock::now();
  SolveResult out;
  out.x.assign(n, 0.0);
  const double bnorm = detail::vnorm(b);
  out.residuals.push_back(bnorm);
  if (bnorm == 0.0) {
    out.converged = true;
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  std::vector<double> y(n, 0.0), r(n), p(n), w(n), t1(n), t2(n), x(n), true_r(n);
  m.left.apply(b, r);  // r = K^{-1} b - (K^{-1} A K^{-T}) y, y = 0
  p = r;
  double rr = detail::vdot(r, r);
  auto hat_apply = [&](std::span<const double> in, std::span<double> outv) {
    m.right.apply(in, t1);
    a.apply(t1, t2);
    m.left.apply(t2, outv);
  };

  for (int k = 1; k <= cfg.max_iter; ++k) {
    hat_apply(p, w);
    const double pap = detail::vdot(p, w);
    if (!(pap > 0.0)) {
      out.breakdown = true;
      break;
    }
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * p[i];
    for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * w[i];
    // Residual of the original system at the current iterate.
    m.right.apply(y, x);
    a.apply(x, t2);
    for (std::size_t i = 0; i < n; ++i) true_r[i] = b[i] - t2[i];
    const double res = detail::vnorm(true_r);
    out.residuals.push_back(res);
    out.iterations = k;
    if (res / bnorm <= cfg.tol) {
      out.converged = true;
      break;
    }
    const double rr_next = detail::vdot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  m.right.apply(y, out.x);
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Plain conjugate gradient from x_0 = 0.
inline SolveResult cg(const LinearOperator& a, std::span<const double> b, const SolveConfig& cfg) {
  return pcg_symmetric(a, b, identity_preconditioner(a.n), cfg);
}

namespace detail {

// Columns of the lower triangle (diagonal separated) in global indices.
struct LowerTriangle {
  std::vector<double> diag;
  std::vector<SparseColumn> cols;  // strictly lower entries per column

  index_t n() const { return static_cast<index_t>(diag.size()); }

  // x <- (D + L)^{-1} b
  void forward_solve(std::span<const double> b, std::span<double> x) const {
    std::copy(b.begin(), b.end(), x.begin());
    for (index_t j = 0; j < n(); ++j) {
      x[static_cast<std::size_t>(j)] /= diag[static_cast<std::size_t>(j)];
      const double xj = x[static_cast<std::size_t>(j)];
      for (const auto& [r, v] : cols[static_cast<std::size_t>(j)].entries())
        x[static_cast<std::size_t>(r)] -= v * xj;
    }
  }

  // x <- (D + L)^{-T} b, using columns of the lower factor as rows.
  void backward_solve(std::span<const double> b, std::span<double> x) const {
    for (index_t j = n() - 1; j >= 0; --j) {
      double acc = b[static_cast<std::size_t>(j)];
      for (const auto& [r, v] : cols[static_cast<std::size_t>(j)].entries())
        acc -= v * x[static_cast<std::size_t>(r)];
      x[static_cast<std::size_t>(j)] = acc / diag[static_cast<std::size_t>(j)];
    }
  }
};

inline LowerTriangle extract_lower(const BlockedSparseMatrix& a) {
  LowerTriangle lower;
  const auto n = static_cast<std::size_t>(a.dim());
  lower.diag.assign(n, 0.0);
  lower.cols.resize(n);
  for (const Triplet& t : a.to_triplets()) {
    if (t.row == t.col)
      lower.diag[static_cast<std::size_t>(t.row)] = t.value;
    else if (t.row > t.col)
      lower.cols[static_cast<std::size_t>(t.col)].append(t.row, t.value);
  }
  for (auto& col : lower.cols) col.compress();
  return lower;
}

}  // namespace detail

/// Diagonal preconditioner: M^{-1/2} scales entry i by 1/sqrt(a_ii), with 0
/// substituted for vanishing (or negative) diagonal entries.
inline SplitPreconditioner jacobi_preconditioner(const BlockedSparseMatrix& a) {
  auto scale = std::make_shared<std::vector<double>>(static_cast<std::size_t>(a.dim()), 0.0);
  for (const Triplet& t : a.to_triplets())
    if (t.row == t.col && t.value > 0.0)
      (*scale)[static_cast<std::size_t>(t.row)] = 1.0 / std::sqrt(t.value);
  auto apply = [scale](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (*scale)[i] * in[i];
  };
  return {{a.dim(), apply}, {a.dim(), apply}};
}

/// SSOR: M = 1/(omega (2 - omega)) (D/omega + L) (D/omega)^{-1} (D/omega + L)^T,
/// which at omega = 1 is (D + L) D^{-1} (D + L)^T. Split as K = s (D/omega + L) D^{-1/2}.
inline SplitPreconditioner ssor_preconditioner(const BlockedSparseMatrix& a, double omega = 1.0) {
  if (!(omega > 0.0 && omega < 2.0)) throw std::invalid_argument("ssor: omega must be in (0, 2)");
  auto lower = std::make_shared<detail::LowerTriangle>(detail::extract_lower(a));
  for (index_t i = 0; i < lower->n(); ++i)
    if (lower->diag[static_cast<std::size_t>(i)] == 0.0)
      throw NumericError("ssor: zero diagonal entry at row " + std::to_string(i));
  // Scale the triangle to D/omega + L; K^{-1} = sqrt((2-omega)/omega) D^{1/2} (D/omega + L)^{-1}
  // with D the original diagonal.
  auto sqrt_d = std::make_shared<std::vector<double>>(static_cast<std::size_t>(lower->n()));
  const double front = std::sqrt((2.0 - omega) / omega);
  for (index_t i = 0; i < lower->n(); ++i) {
    const double d = lower->diag[static_cast<std::size_t>(i)];
    (*sqrt_d)[static_cast<std::size_t>(i)] = front * std::sqrt(std::abs(d));
    lower->diag[static_cast<std::size_t>(i)] = d / omega;
  }
  auto left = [lower, sqrt_d](std::span<const double> in, std::span<double> out) {
    lower->forward_solve(in, out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*sqrt_d)[i];
  };
  auto right = [lower, sqrt_d](std::span<const double> in, std::span<double> out) {
    std::vector<double> scaled(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) scaled[i] = in[i] * (*sqrt_d)[i];
    lower->backward_solve(scaled, out);
  };
  return {{a.dim(), left}, {a.dim(), right}};
}

struct IncompleteCholesky {
  SplitPreconditioner precond;
  bool compensated = false;  // restarted on A + alpha * diag(A)
  double alpha = 0.0;
};

/// IC(0): incomplete Cholesky on the sparsity pattern of A. On a breakdown
/// the factorization restarts once on the diagonally compensated matrix
/// A + alpha * diag(A) with alpha = max_i (sum_j |a_ij|) / a_ii.
inline IncompleteCholesky ic_preconditioner(const BlockedSparseMatrix& a) {
  const auto n = static_cast<std::size_t>(a.dim());
  detail::LowerTriangle pattern = detail::extract_lower(a);

  auto attempt = [&](double diag_boost, detail::LowerTriangle& l) -> bool {
    l = pattern;
    for (std::size_t j = 0; j < n; ++j) l.diag[j] *= (1.0 + diag_boost);
    // rows[r] lists (column k, entry position) of finished entries L(r, k).
    std::vector<std::vector<std::pair<index_t, std::size_t>>> rows(n);
    std::vector<double> work_vals;
    for (std::size_t j = 0; j < n; ++j) {
      auto& col = l.cols[j].entries();
      double pivot = l.diag[j];
      work_vals.assign(col.size(), 0.0);
      for (std::size_t t = 0; t < col.size(); ++t) work_vals[t] = col[t].second;
      for (const auto& [k, pos] : rows[j]) {
        const auto& ck = l.cols[static_cast<std::size_t>(k)].entries();
        const double ljk = ck[pos].second;
        pivot -= ljk * ljk;
        // Update pattern entries below j in column j.
        std::size_t t = 0;
        for (std::size_t s = pos + 1; s < ck.size(); ++s) {
          const index_t r = ck[s].first;
          while (t < col.size() && col[t].first < r) ++t;
          if (t == col.size()) break;
          if (col[t].first == r) work_vals[t] -= ck[s].second * ljk;
        }
      }
      if (!(pivot > 0.0)) return false;
      l.diag[j] = std::sqrt(pivot);
      for (std::size_t t = 0; t < col.size(); ++t) {
        col[t].second = work_vals[t] / l.diag[j];
        rows[static_cast<std::size_t>(col[t].first)].emplace_back(static_cast<index_t>(j), t);
      }
    }
    return true;
  };

  IncompleteCholesky result;
  auto factor = std::make_shared<detail::LowerTriangle>();
  if (!attempt(0.0, *factor)) {
    // Diagonal compensation per the usual row-sum rule.
    std::vector<double> row_abs_sum(n, 0.0);
    std::vector<double> diag(n, 0.0);
    for (const Triplet& t : a.to_triplets()) {
      row_abs_sum[static_cast<std::size_t>(t.row)] += std::abs(t.value);
      if (t.row == t.col) diag[static_cast<std::size_t>(t.row)] = t.value;
    }
    double alpha = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(diag[i] > 0.0))
        throw NumericError("ic: non-positive diagonal, cannot compensate row " + std::to_string(i));
      alpha = std::max(alpha, row_abs_sum[i] / diag[i]);
    }
    result.compensated = true;
    result.alpha = alpha;
    if (!attempt(alpha, *factor))
      throw NumericError("ic: breakdown persists after diagonal compensation");
  }
  auto left = [factor](std::span<const double> in, std::span<double> out) {
    factor->forward_solve(in, out);
  };
  auto right = [factor](std::span<const double> in, std::span<double> out) {
    factor->backward_solve(in, out);
  };
  result.precond = {{a.dim(), left}, {a.dim(), right}};
  return result;
}

/// The factorized operator's inverse square root as a symmetric split pair.
inline SplitPreconditioner pmmf_preconditioner(std::shared_ptr<const MmfFactorization> f) {
  auto op = std::make_shared<MmfOperator>(std::move(f));
  auto apply = [op](std::span<const double> in, std::span<double> out) {
    op->apply(MmfOperator::Mode::inv_sqrt, in, out);
  };
  return {{op->dim(), apply}, {op->dim(), apply}};
}

/// Aggregated residual traces over several random right-hand sides.
struct SolveReport {
  std::string method;
  std::vector<double> mean_residual;  // index = iteration, constant-extended
  std::vector<double> std_residual;
  double mean_iterations = 0.0;
  int max_iterations_used = 0;
  bool all_converged = true;
  bool any_breakdown = false;
  double wall_ms_total = 0.0;
  double per_iteration_ms = 0.0;
  std::vector<SolveResult> runs;  // per-run traces (solution vectors dropped)
};

/// Runs rhs_count solves against seeded unit-norm Gaussian right-hand sides
/// (in parallel; results are independent of the worker count) and averages
/// the residual traces per iteration.
inline SolveReport run_solve_experiment(const LinearOperator& a, const SplitPreconditioner* m,
                                        const SolveConfig& cfg, const std::string& method_name) {
  cfg.validate();
  SolveReport report;
  report.method = method_name;
  report.runs.resize(static_cast<std::size_t>(cfg.rhs_count));
  const auto start = std::chrono::steady_clock::now();
  parallel::for_each_index(static_cast<std::size_t>(cfg.rhs_count), [&](std::size_t r) {
    Rng rng(Rng::derive(cfg.seed, {0xB0u, static_cast<std::uint64_t>(r)}));
    std::vector<double> b(static_cast<std::size_t>(a.n));
    for (auto& v : b) v = rng.normal();
    const double norm = detail::vnorm(b);
    if (norm > 0.0)
      for (auto& v : b) v /= norm;
    SolveResult res = m ? pcg_symmetric(a, b, *m, cfg) : cg(a, b, cfg);
    res.x.clear();
    report.runs[r] = std::move(res);
  });
  report.wall_ms_total =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  std::size_t longest = 0;
  long total_iters = 0;
  for (const auto& run : report.runs) {
    longest = std::max(longest, run.residuals.size());
    total_iters += run.iterations;
    report.max_iterations_used = std::max(report.max_iterations_used, run.iterations);
    report.all_converged = report.all_converged && run.converged;
    report.any_breakdown = report.any_breakdown || run.breakdown;
  }
  report.mean_iterations = static_cast<double>(total_iters) / cfg.rhs_count;
  report.per_iteration_ms = total_iters > 0 ? report.wall_ms_total / static_cast<double>(total_iters) : 0.0;
  report.mean_residual.assign(longest, 0.0);
  report.std_residual.assign(longest, 0.0);
  for (std::size_t k = 0; k < longest; ++k) {
    double mean = 0.0;
    for (const auto& run : report.runs)
      mean += (k < run.residuals.size()) ? run.residuals[k] : run.residuals.back();
    mean /= cfg.rhs_count;
    double var = 0.0;
    for (const auto& run : report.runs) {
      const double v = ((k < run.residuals.size()) ? run.residuals[k] : run.residuals.back()) - mean;
      var += v * v;
    }
    report.mean_residual[k] = mean;
    report.std_residual[k] = std::sqrt(var / cfg.rhs_count);
  }
  return report;
}

}  // namespace pmmf
