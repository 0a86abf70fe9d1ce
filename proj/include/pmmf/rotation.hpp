// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pmmf/dense.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

/// A k-point rotation: k distinct global indices plus a k x k orthogonal
/// matrix. k = 2 is a Givens rotation. Applied to a matrix a as q a q^T with
/// q embedded in the identity on the listed coordinates.
struct Rotation {
  std::vector<index_t> indices;
  DenseMatrix matrix;
  int stage = 0;

  index_t order() const { return static_cast<index_t>(indices.size()); }

  double orthogonality_defect() const { return orthogonality_error(matrix); }

  bool is_identity(double tol = 1e-12) const {
    DenseMatrix diff = matrix;
    for (index_t i = 0; i < diff.rows(); ++i) diff(i, i) -= 1.0;
    return diff.max_abs() <= tol;
  }

  friend bool operator==(const Rotation&, const Rotation&) = default;
};

}  // namespace pmmf
