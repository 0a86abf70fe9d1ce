// SPDX-License-Identifier: Apache-2.0
//
// Matrix-free arithmetic with a stored factorization: products, inverses and
// inverse square roots by applying the rotations individually, plus dense
// reconstruction and error evaluation at desk scale, and the uniform-column
// Nystrom baseline used in compression comparisons.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "pmmf/blocked_matrix.hpp"
#include "pmmf/dense.hpp"
#include "pmmf/factorizer.hpp"
#include "pmmf/rng.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

/// Cached application of the factorized operator and of its pseudo-inverse
/// powers. The core eigendecomposition is computed once; core eigenvalues and
/// retired diagonal entries with magnitude below zero_threshold act as zero,
/// and the inverse square root additionally treats negative values as zero.
class MmfOperator {
 public:
  enum class Mode { forward, inverse, inv_sqrt };

  explicit MmfOperator(std::shared_ptr<const MmfFactorization> f, double zero_threshold = 1e-12)
      : f_(std::move(f)), zero_threshold_(zero_threshold) {
    core_eig_ = jacobi_eigensystem(f_->h.core);
    for (double lambda : core_eig_.values)
      if (lambda < -zero_threshold_) ++negative_core_eigenvalues_;
    for (const auto& [i, d] : f_->h.diagonal)
      if (d < -zero_threshold_) ++negative_diagonal_entries_;
  }

  index_t dim() const { return f_->n; }
  const MmfFactorization& factorization() const { return *f_; }

  /// Count of negative spectrum entries that inv_sqrt maps to zero.
  int inv_sqrt_zeroed_negatives() const {
    return negative_core_eigenvalues_ + negative_diagonal_entries_;
  }

  void apply(Mode mode, std::span<const double> in, std::span<double> out) const {
    if (static_cast<index_t>(in.size()) != f_->n || static_cast<index_t>(out.size()) != f_->n)
      throw std::invalid_argument("MmfOperator::apply: dimension mismatch");
    std::vector<double> v(in.begin(), in.end());
    // v <- Q v, stages first to last, rotations applied individually.
    for (const Stage& stage : f_->stages)
      for (const Rotation& rot : stage.rotations) rotate_forward(rot, v);
    // v <- H^(power) v on the core block and the retired diagonal.
    apply_core(mode, v);
    for (const auto& [i, d] : f_->h.diagonal)
      v[static_cast<std::size_t>(i)] *= scalar_factor(mode, d);
    // v <- Q^T v, stages last to first, rotations reversed.
    for (auto sit = f_->stages.rbegin(); sit != f_->stages.rend(); ++sit)
      for (auto rit = sit->rotations.rbegin(); rit != sit->rotations.rend(); ++rit)
        rotate_transposed(*rit, v);
    std::copy(v.begin(), v.end(), out.begin());
  }

  std::vector<double> apply(Mode mode, std::span<const double> in) const {
    std::vector<double> out(in.size());
    apply(mode, in, out);
    return out;
  }

 private:
  double scalar_factor(Mode mode, double d) const {
    switch (mode) {
      case Mode::forward:
        return d;
      case Mode::inverse:
        return std::abs(d) < zero_threshold_ ? 0.0 : 1.0 / d;
      case Mode::inv_sqrt:
        return d < zero_threshold_ ? 0.0 : 1.0 / std::sqrt(d);
    }
    return 0.0;
  }

  void apply_core(Mode mode, std::vector<double>& v) const {
    const index_t g = static_cast<index_t>(f_->h.core_indices.size());
    if (g == 0) return;
    std::vector<double> x(static_cast<std::size_t>(g));
    for (index_t a = 0; a < g; ++a)
      x[static_cast<std::size_t>(a)] =
          v[static_cast<std::size_t>(f_->h.core_indices[static_cast<std::size_t>(a)])];
    // Spectral application: E f(lambda) E^T x.
    std::vector<double> y(static_cast<std::size_t>(g), 0.0);
    for (index_t e = 0; e < g; ++e) {
      double dot = 0.0;
      for (index_t a = 0; a < g; ++a) dot += core_eig_.vectors(a, e) * x[static_cast<std::size_t>(a)];
      dot *= scalar_factor(mode, core_eig_.values[static_cast<std::size_t>(e)]);
      for (index_t a = 0; a < g; ++a) y[static_cast<std::size_t>(a)] += core_eig_.vectors(a, e) * dot;
    }
    for (index_t a = 0; a < g; ++a)
      v[static_cast<std::size_t>(f_->h.core_indices[static_cast<std::size_t>(a)])] =
          y[static_cast<std::size_t>(a)];
  }

  static void rotate_forward(const Rotation& rot, std::vector<double>& v) {
    const index_t k = rot.order();
    double vals[8];
    for (index_t b = 0; b < k; ++b)
      vals[b] = v[static_cast<std::size_t>(rot.indices[static_cast<std::size_t>(b)])];
    for (index_t a = 0; a < k; ++a) {
      double acc = 0.0;
      for (index_t b = 0; b < k; ++b) acc += rot.matrix(a, b) * vals[b];
      v[static_cast<std::size_t>(rot.indices[static_cast<std::size_t>(a)])] = acc;
    }
  }

  static void rotate_transposed(const Rotation& rot, std::vector<double>& v) {
    const index_t k = rot.order();
    double vals[8];
    for (index_t b = 0; b < k; ++b)
      vals[b] = v[static_cast<std::size_t>(rot.indices[static_cast<std::size_t>(b)])];
    for (index_t a = 0; a < k; ++a) {
      double acc = 0.0;
      for (index_t b = 0; b < k; ++b) acc += rot.matrix(b, a) * vals[b];
      v[static_cast<std::size_t>(rot.indices[static_cast<std::size_t>(a)])] = acc;
    }
  }

  std::shared_ptr<const MmfFactorization> f_;
  SymmetricEigen core_eig_;
  double zero_threshold_ = 1e-12;
  int negative_core_eigenvalues_ = 0;
  int negative_diagonal_entries_ = 0;
};

/// One-shot helpers; prefer MmfOperator when applying repeatedly.
inline std::vector<double> apply(const MmfFactorization& f, std::span<const double> v) {
  MmfOperator op(std::shared_ptr<const MmfFactorization>(&f, [](const MmfFactorization*) {}));
  return op.apply(MmfOperator::Mode::forward, v);
}

inline std::vector<double> apply_inverse(const MmfFactorization& f, std::span<const double> v) {
  MmfOperator op(std::shared_ptr<const MmfFactorization>(&f, [](const MmfFactorization*) {}));
  return op.apply(MmfOperator::Mode::inverse, v);
}

inline std::vector<double> apply_inv_sqrt(const MmfFactorization& f, std::span<const double> v) {
  MmfOperator op(std::shared_ptr<const MmfFactorization>(&f, [](const MmfFactorization*) {}));
  return op.apply(MmfOperator::Mode::inv_sqrt, v);
}

/// Dense product of all stage rotations, U = Q_P ... Q_1 (desk scale).
inline DenseMatrix stage_product_dense(const MmfFactorization& f) {
  DenseMatrix u = DenseMatrix::identity(f.n);
  for (const Stage& stage : f.stages)
    for (const Rotation& rot : stage.rotations) {
      const index_t k = rot.order();
      std::vector<double> tmp(static_cast<std::size_t>(k));
      for (index_t col = 0; col < f.n; ++col) {
        for (index_t b = 0; b < k; ++b)
          tmp[static_cast<std::size_t>(b)] = u(rot.indices[static_cast<std::size_t>(b)], col);
        for (index_t a = 0; a < k; ++a) {
          double acc = 0.0;
          for (index_t b = 0; b < k; ++b) acc += rot.matrix(a, b) * tmp[static_cast<std::size_t>(b)];
          u(rot.indices[static_cast<std::size_t>(a)], col) = acc;
        }
      }
    }
  return u;
}

/// Explicit dense reconstruction Q^T H Q. Feasible only at desk scale; the
/// cap guards against accidental use on large factorizations.
inline DenseMatrix reconstruct_dense(const MmfFactorization& f, index_t cap = 4096) {
  if (f.n > cap) throw NumericError("reconstruct_dense: dimension exceeds cap");
  DenseMatrix m(f.n, f.n);
  const index_t g = static_cast<index_t>(f.h.core_indices.size());
  for (index_t a = 0; a < g; ++a)
    for (index_t b = 0; b < g; ++b)
      m(f.h.core_indices[static_cast<std::size_t>(a)], f.h.core_indices[static_cast<std::size_t>(b)]) =
          f.h.core(a, b);
  for (const auto& [i, d] : f.h.diagonal) m(i, i) = d;
  // Conjugate back: stages last to first, rotations reversed, m <- q^T m q.
  std::vector<double> tmp(8);
  for (auto sit = f.stages.rbegin(); sit != f.stages.rend(); ++sit) {
    for (auto rit = sit->rotations.rbegin(); rit != sit->rotations.rend(); ++rit) {
      const Rotation& rot = *rit;
      const index_t k = rot.order();
      for (index_t col = 0; col < f.n; ++col) {
        for (index_t b = 0; b < k; ++b)
          tmp[static_cast<std::size_t>(b)] = m(rot.indices[static_cast<std::size_t>(b)], col);
        for (index_t a = 0; a < k; ++a) {
          double acc = 0.0;
          for (index_t b = 0; b < k; ++b) acc += rot.matrix(b, a) * tmp[static_cast<std::size_t>(b)];
          m(rot.indices[static_cast<std::size_t>(a)], col) = acc;
        }
      }
      for (index_t row = 0; row < f.n; ++row) {
        for (index_t b = 0; b < k; ++b)
          tmp[static_cast<std::size_t>(b)] = m(row, rot.indices[static_cast<std::size_t>(b)]);
        for (index_t a = 0; a < k; ++a) {
          double acc = 0.0;
          for (index_t b = 0; b < k; ++b) acc += rot.matrix(b, a) * tmp[static_cast<std::size_t>(b)];
          m(row, rot.indices[static_cast<std::size_t>(a)]) = acc;
        }
      }
    }
  }
  return m;
}

inline DenseMatrix dense_from_blocked(const BlockedSparseMatrix& a, index_t cap = 4096) {
  if (a.dim() > cap) throw NumericError("dense_from_blocked: dimension exceeds cap");
  DenseMatrix m(a.dim(), a.dim());
  for (const Triplet& t : a.to_triplets()) m(t.row, t.col) = t.value;
  return m;
}

enum class ResidualMethod { accumulated, dense };

/// ||A - A~||_F either streamed during factorization or evaluated densely.
inline double residual_frobenius(const MmfFactorization& f, const BlockedSparseMatrix& a,
                                 ResidualMethod method, index_t cap = 4096) {
  if (method == ResidualMethod::accumulated) return std::sqrt(f.residual_sq);
  DenseMatrix diff = dense_from_blocked(a, cap);
  DenseMatrix rec = reconstruct_dense(f, cap);
  double s = 0.0;
  for (index_t i = 0; i < diff.rows(); ++i)
    for (index_t j = 0; j < diff.cols(); ++j) {
      const double d = diff(i, j) - rec(i, j);
      s += d * d;
    }
  return std::sqrt(s);
}

/// ||A - A_k||_F for the best rank-k approximation of a symmetric matrix.
inline double best_rank_k_error(const DenseMatrix& a, index_t k) {
  SymmetricEigen eig = jacobi_eigensystem(a);
  std::vector<double> mags(eig.values.size());
  for (std::size_t i = 0; i < eig.values.size(); ++i) mags[i] = std::abs(eig.values[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = static_cast<std::size_t>(std::min<index_t>(k, static_cast<index_t>(mags.size())));
       i < mags.size(); ++i)
    s += mags[i] * mags[i];
  return std::sqrt(s);
}

struct NystromResult {
  double frobenius_error = 0.0;
  std::vector<index_t> columns;  // sampled column indices, ascending
};

/// Uniform-column Nystrom sketch A ~= C W^+ C^T from m sampled columns,
/// evaluated densely at desk scale.
inline NystromResult nystrom_uniform(const BlockedSparseMatrix& a, index_t m, std::uint64_t seed,
                                     index_t cap = 4096) {
  const index_t n = a.dim();
  if (m < 1 || m > n) throw std::invalid_argument("nystrom_uniform: m out of range");
  DenseMatrix dense = dense_from_blocked(a, cap);
  // Sample m distinct columns uniformly.
  std::vector<index_t> ids(static_cast<std::size_t>(n));
  for (index_t i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  for (index_t t = 0; t < m; ++t) {
    const auto pick = static_cast<std::size_t>(t) +
                      static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(n - t)));
    std::swap(ids[static_cast<std::size_t>(t)], ids[pick]);
  }
  NystromResult result;
  result.columns.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(result.columns.begin(), result.columns.end());

  DenseMatrix c(n, m);
  DenseMatrix w(m, m);
  for (index_t j = 0; j < m; ++j) {
    const index_t gj = result.columns[static_cast<std::size_t>(j)];
    for (index_t i = 0; i < n; ++i) c(i, j) = dense(i, gj);
    for (index_t i = 0; i < m; ++i) w(i, j) = dense(result.columns[static_cast<std::size_t>(i)], gj);
  }
  SymmetricEigen eig = jacobi_eigensystem(w);
  double max_mag = 0.0;
  for (double lambda : eig.values) max_mag = std::max(max_mag, std::abs(lambda));
  const double threshold = 1e-10 * max_mag;
  // W^+ = E f(lambda) E^T with small eigenvalues dropped.
  DenseMatrix w_pinv(m, m);
  for (index_t e = 0; e < m; ++e) {
    const double lambda = eig.values[static_cast<std::size_t>(e)];
    if (std::abs(lambda) <= threshold) continue;
    const double inv = 1.0 / lambda;
    for (index_t i = 0; i < m; ++i)
      for (index_t j = 0; j < m; ++j)
        w_pinv(i, j) += inv * eig.vectors(i, e) * eig.vectors(j, e);
  }
  DenseMatrix approx = c.multiply(w_pinv).multiply(c.transposed());
  double s = 0.0;
  for (index_t i = 0; i < n; ++i)
    for (index_t j = 0; j < n; ++j) {
      const double d = dense(i, j) - approx(i, j);
      s += d * d;
    }
  result.frobenius_error = std::sqrt(s);
  return result;
}

}  // namespace pmmf
