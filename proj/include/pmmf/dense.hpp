// SPDX-License-Identifier: Apache-2.0
//
// Small dense matrices and a cyclic Jacobi eigensolver. Dense objects appear
// only at desk scale: rotation blocks, cluster Grams, the factorization core,
// and explicit reconstructions used for error evaluation.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "pmmf/types.hpp"

namespace pmmf {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(index_t rows, index_t cols)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("DenseMatrix: negative shape");
  }

  static DenseMatrix identity(index_t n) {
    DenseMatrix m(n, n);
    for (index_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  index_t rows() const { return rows_; }
  index_t cols() const { return cols_; }

  double& operator()(index_t i, index_t j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
  double operator()(index_t i, index_t j) const {
    return data_[static_cast<std::size_t>(i * cols_ + j)];
  }

  std::span<double> row(index_t i) {
    return {data_.data() + static_cast<std::size_t>(i * cols_), static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(index_t i) const {
    return {data_.data() + static_cast<std::size_t>(i * cols_), static_cast<std::size_t>(cols_)};
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (index_t i = 0; i < rows_; ++i)
      for (index_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  DenseMatrix multiply(const DenseMatrix& other) const {
    if (cols_ != other.rows_) throw std::invalid_argument("DenseMatrix::multiply: shape mismatch");
    DenseMatrix out(rows_, other.cols_);
    for (index_t i = 0; i < rows_; ++i)
      for (index_t k = 0; k < cols_; ++k) {
        const double a = (*this)(i, k);
        if (a == 0.0) continue;
        for (index_t j = 0; j < other.cols_; ++j) out(i, j) += a * other(k, j);
      }
    return out;
  }

  std::vector<double> multiply_vector(std::span<const double> v) const {
    if (static_cast<index_t>(v.size()) != cols_)
      throw std::invalid_argument("DenseMatrix::multiply_vector: length mismatch");
    std::vector<double> out(static_cast<std::size_t>(rows_), 0.0);
    for (index_t i = 0; i < rows_; ++i) {
      double acc = 0.0;
      for (index_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * v[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  double max_abs_off_diagonal() const {
    double m = 0.0;
    for (index_t i = 0; i < rows_; ++i)
      for (index_t j = 0; j < cols_; ++j)
        if (i != j) m = std::max(m, std::abs((*this)(i, j)));
    return m;
  }

  double max_asymmetry() const {
    double m = 0.0;
    for (index_t i = 0; i < rows_; ++i)
      for (index_t j = i + 1; j < cols_; ++j)
        m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
    return m;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  index_t rows_ = 0;
  index_t cols_ = 0;
  std::vector<double> data_;
};

/// max |(q q^T - I)_{ab}|, the orthogonality defect of a square matrix.
inline double orthogonality_error(const DenseMatrix& q) {
  const index_t n = q.rows();
  double worst = 0.0;
  for (index_t a = 0; a < n; ++a)
    for (index_t b = 0; b < n; ++b) {
      double dot = 0.0;
      for (index_t t = 0; t < n; ++t) dot += q(a, t) * q(b, t);
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

namespace detail {

// Stable closed-form angle zeroing entry (p,r); returns {cos, sin} of the
// plane rotation q = [[c,-s],[s,c]] with (q g q^T)_{pr} = 0.
inline std::pair<double, double> jacobi_angle(double gpp, double grr, double gpr) {
  if (gpr == 0.0) return {1.0, 0.0};
  const double tau = (grr - gpp) / (2.0 * gpr);
  const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  return {c, t * c};
}

}  // namespace detail

/// Cyclic Jacobi diagonalization of a symmetric matrix: returns q with
/// q a q^T diagonal. Off-diagonals are driven below rel_tol * ||a||_F.
inline DenseMatrix jacobi_diagonalize(DenseMatrix& a, double rel_tol = 1e-15,
                                      int max_sweeps = 64) {
  const index_t n = a.rows();
  if (n != a.cols()) throw std::invalid_argument("jacobi_diagonalize: matrix not square");
  DenseMatrix q = DenseMatrix::identity(n);
  const double scale = a.frobenius_norm();
  if (scale == 0.0 || n < 2) return q;
  const double stop = rel_tol * scale;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (index_t i = 0; i < n; ++i)
      for (index_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= stop) break;
    for (index_t p = 0; p < n; ++p) {
      for (index_t r = p + 1; r < n; ++r) {
        if (a(p, r) == 0.0) continue;
        const auto [c, s] = detail::jacobi_angle(a(p, p), a(r, r), a(p, r));
        // a <- j a j^T restricted to rows/cols p and r
        for (index_t t = 0; t < n; ++t) {
          const double ap = a(p, t), ar = a(r, t);
          a(p, t) = c * ap - s * ar;
          a(r, t) = s * ap + c * ar;
        }
        for (index_t t = 0; t < n; ++t) {
          const double ap = a(t, p), ar = a(t, r);
          a(t, p) = c * ap - s * ar;
          a(t, r) = s * ap + c * ar;
        }
        a(p, r) = 0.0;
        a(r, p) = 0.0;
        for (index_t t = 0; t < n; ++t) {
          const double qp = q(p, t), qr = q(r, t);
          q(p, t) = c * qp - s * qr;
          q(r, t) = s * qp + c * qr;
        }
      }
    }
  }
  return q;
}

struct SymmetricEigen {
  std::vector<double> values;  // a = vectors * diag(values) * vectors^T
  DenseMatrix vectors;         // eigenvectors as columns
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
inline SymmetricEigen jacobi_eigensystem(DenseMatrix a, double rel_tol = 1e-15,
                                         int max_sweeps = 64) {
  DenseMatrix q = jacobi_diagonalize(a, rel_tol, max_sweeps);
  SymmetricEigen eig;
  eig.values.resize(static_cast<std::size_t>(a.rows()));
  for (index_t i = 0; i < a.rows(); ++i) eig.values[static_cast<std::size_t>(i)] = a(i, i);
  eig.vectors = q.transposed();
  return eig;
}

}  // namespace pmmf
