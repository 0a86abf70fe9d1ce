// SPDX-License-Identifier: Apache-2.0
//
// Symmetric blocked sparse matrix: an m x m grid of sparse blocks induced by
// a column/row clustering. Supports rotation application from both sides,
// column inner products, cluster Gram matrices, two-phase reblocking, and
// matrix/vector products. Blocks are independently owned units so stage-level
// operations can run block-parallel with no shared mutable state.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pmmf/parallel.hpp"
#include "pmmf/partition.hpp"
#include "pmmf/rotation.hpp"
#include "pmmf/sparse.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

/// Vector stored in the same blocked form as the matrix: one dense segment
/// per cluster, addressed by the shared partition.
class BlockedVector {
 public:
  BlockedVector() = default;
  explicit BlockedVector(std::shared_ptr<const Partition> partition)
      : partition_(std::move(partition)) {
    segments_.resize(static_cast<std::size_t>(partition_->num_clusters()));
    for (index_t u = 0; u < partition_->num_clusters(); ++u)
      segments_[static_cast<std::size_t>(u)].assign(
          static_cast<std::size_t>(partition_->cluster_size(u)), 0.0);
  }

  static BlockedVector from_flat(std::shared_ptr<const Partition> partition,
                                 std::span<const double> v) {
    BlockedVector out(std::move(partition));
    for (index_t u = 0; u < out.partition_->num_clusters(); ++u) {
      auto cluster = out.partition_->cluster(u);
      for (std::size_t o = 0; o < cluster.size(); ++o) {
        const auto g = static_cast<std::size_t>(cluster[o]);
        if (g >= v.size()) throw std::invalid_argument("BlockedVector: flat vector too short");
        out.segments_[static_cast<std::size_t>(u)][o] = v[g];
      }
    }
    return out;
  }

  const Partition& partition() const { return *partition_; }
  std::shared_ptr<const Partition> partition_ptr() const { return partition_; }

  std::vector<double>& segment(index_t u) { return segments_[static_cast<std::size_t>(u)]; }
  const std::vector<double>& segment(index_t u) const {
    return segments_[static_cast<std::size_t>(u)];
  }

  double get(index_t global) const {
    auto slot = partition_->locate(global);
    if (!slot.valid()) throw std::out_of_range("BlockedVector: index not covered");
    return segments_[static_cast<std::size_t>(slot.cluster)][static_cast<std::size_t>(slot.offset)];
  }

  void set(index_t global, double v) {
    auto slot = partition_->locate(global);
    if (!slot.valid()) throw std::out_of_range("BlockedVector: index not covered");
    segments_[static_cast<std::size_t>(slot.cluster)][static_cast<std::size_t>(slot.offset)] = v;
  }

  /// Scatters the segments back to a length-n vector; uncovered indices get 0.
  std::vector<double> to_flat(index_t n) const {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (index_t u = 0; u < partition_->num_clusters(); ++u) {
      auto cluster = partition_->cluster(u);
      for (std::size_t o = 0; o < cluster.size(); ++o)
        out[static_cast<std::size_t>(cluster[o])] = segments_[static_cast<std::size_t>(u)][o];
    }
    return out;
  }

  /// Moves the stored values under a new partition; indices absent from the
  /// new partition are dropped.
  BlockedVector reblock(std::shared_ptr<const Partition> new_partition) const {
    BlockedVector out(std::move(new_partition));
    for (index_t u = 0; u < out.partition_->num_clusters(); ++u) {
      auto cluster = out.partition_->cluster(u);
      for (std::size_t o = 0; o < cluster.size(); ++o) {
        auto slot = partition_->locate(cluster[o]);
        if (!slot.valid()) throw std::invalid_argument("BlockedVector::reblock: index not present");
        out.segments_[static_cast<std::size_t>(u)][o] =
            segments_[static_cast<std::size_t>(slot.cluster)][static_cast<std::size_t>(slot.offset)];
      }
    }
    return out;
  }

 private:
  std::shared_ptr<const Partition> partition_;
  std::vector<std::vector<double>> segments_;
};

class BlockedSparseMatrix {
 public:
  /// One block: the submatrix A[B_u, B_v] stored column-wise in local indices.
  struct Block {
    index_t nrows = 0;
    std::vector<SparseColumn> cols;

    index_t nnz() const {
      std::size_t s = 0;
      for (const auto& c : cols) s += c.nnz();
      return static_cast<index_t>(s);
    }
  };

  BlockedSparseMatrix() = default;

  BlockedSparseMatrix(index_t n, Partition partition)
      : n_(n), partition_(std::make_shared<const Partition>(std::move(partition))) {
    init_blocks();
  }

  BlockedSparseMatrix(index_t n, std::shared_ptr<const Partition> partition)
      : n_(n), partition_(std::move(partition)) {
    init_blocks();
  }

  /// Builds from coordinate entries; duplicates are summed in input order.
  static BlockedSparseMatrix from_triplets(index_t n, std::span<const Triplet> entries,
                                           Partition partition) {
    return from_triplets(n, entries, std::make_shared<const Partition>(std::move(partition)));
  }

  static BlockedSparseMatrix from_triplets(index_t n, std::span<const Triplet> entries,
                                           std::shared_ptr<const Partition> partition) {
    BlockedSparseMatrix out(n, std::move(partition));
    const Partition& part = *out.partition_;
    for (const Triplet& t : entries) {
      if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
        throw std::out_of_range("from_triplets: index out of range");
      if (!std::isfinite(t.value)) throw std::invalid_argument("from_triplets: non-finite value");
      auto r = part.locate(t.row);
      auto c = part.locate(t.col);
      if (!r.valid() || !c.valid())
        throw std::out_of_range("from_triplets: index not covered by partition");
      out.block(r.cluster, c.cluster).cols[static_cast<std::size_t>(c.offset)].append(r.offset,
                                                                                      t.value);
    }
    for (auto& b : out.blocks_)
      for (auto& col : b.cols) col.compress();
    return out;
  }

  index_t dim() const { return n_; }
  const Partition& partition() const { return *partition_; }
  std::shared_ptr<const Partition> partition_ptr() const { return partition_; }
  index_t num_clusters() const { return m_; }

  Block& block(index_t u, index_t v) { return blocks_[static_cast<std::size_t>(u * m_ + v)]; }
  const Block& block(index_t u, index_t v) const {
    return blocks_[static_cast<std::size_t>(u * m_ + v)];
  }

  index_t nnz() const {
    index_t s = 0;
    for (const auto& b : blocks_) s += b.nnz();
    return s;
  }

  double get(index_t i, index_t j) const {
    check_range(i, j);
    auto r = partition_->locate(i);
    auto c = partition_->locate(j);
    if (!r.valid() || !c.valid()) return 0.0;
    return block(r.cluster, c.cluster).cols[static_cast<std::size_t>(c.offset)].get(r.offset);
  }

  /// Routes a single entry; keeping the matrix symmetric is the caller's duty.
  void set(index_t i, index_t j, double value) {
    check_range(i, j);
    if (!std::isfinite(value)) throw std::invalid_argument("set: non-finite value");
    auto r = partition_->locate(i);
    auto c = partition_->locate(j);
    if (!r.valid() || !c.valid()) throw std::out_of_range("set: index not covered by partition");
    block(r.cluster, c.cluster).cols[static_cast<std::size_t>(c.offset)].set(r.offset, value);
  }

  /// <A(:,j1), A(:,j2)> across all block rows.
  double column_dot(index_t j1, index_t j2) const {
    auto c1 = locate_or_throw(j1);
    auto c2 = locate_or_throw(j2);
    double s = 0.0;
    for (index_t w = 0; w < m_; ++w)
      s += block(w, c1.cluster).cols[static_cast<std::size_t>(c1.offset)].dot(
          block(w, c2.cluster).cols[static_cast<std::size_t>(c2.offset)]);
    return s;
  }

  double column_norm_sq(index_t j) const {
    auto c = locate_or_throw(j);
    double s = 0.0;
    for (index_t w = 0; w < m_; ++w)
      s += block(w, c.cluster).cols[static_cast<std::size_t>(c.offset)].norm_sq();
    return s;
  }

  /// Dense Gram matrix G = A(:,B_u)^T A(:,B_u) of one cluster, accumulated
  /// over block rows. Intended for desk-scale use and for tests; the
  /// factorization path uses the sparse variant below.
  DenseMatrix gram_of_cluster(index_t u) const {
    const index_t c = partition_->cluster_size(u);
    std::vector<DenseMatrix> partial(static_cast<std::size_t>(m_));
    parallel::for_each_index(static_cast<std::size_t>(m_), [&](std::size_t w) {
      DenseMatrix g(c, c);
      const Block& b = block(static_cast<index_t>(w), u);
      // Row views of the block give the outer-product accumulation directly.
      std::vector<std::vector<SparseColumn::Entry>> rows(static_cast<std::size_t>(b.nrows));
      for (std::size_t jl = 0; jl < b.cols.size(); ++jl)
        for (const auto& [r, v] : b.cols[jl].entries())
          rows[static_cast<std::size_t>(r)].emplace_back(static_cast<index_t>(jl), v);
      for (const auto& row : rows)
        for (const auto& [a, va] : row)
          for (const auto& [bcol, vb] : row) g(a, bcol) += va * vb;
      partial[w] = std::move(g);
    });
    DenseMatrix g(c, c);
    for (index_t w = 0; w < m_; ++w)
      for (index_t a = 0; a < c; ++a)
        for (index_t bcol = 0; bcol < c; ++bcol) g(a, bcol) += partial[static_cast<std::size_t>(w)](a, bcol);
    return g;
  }

  /// Sparse Gram matrix of one cluster in cluster-local indices.
  SymmetricSparse gram_of_cluster_sparse(index_t u) const {
    const index_t c = partition_->cluster_size(u);
    SymmetricSparse g(c);
    for (index_t w = 0; w < m_; ++w) {
      const Block& b = block(w, u);
      std::vector<std::vector<SparseColumn::Entry>> rows(static_cast<std::size_t>(b.nrows));
      for (std::size_t jl = 0; jl < b.cols.size(); ++jl)
        for (const auto& [r, v] : b.cols[jl].entries())
          rows[static_cast<std::size_t>(r)].emplace_back(static_cast<index_t>(jl), v);
      for (const auto& row : rows)
        for (std::size_t s = 0; s < row.size(); ++s)
          for (std::size_t t = s; t < row.size(); ++t)
            g.accumulate(row[s].first, row[t].first, row[s].second * row[t].second);
    }
    g.finalize();
    return g;
  }

  /// Copy of the diagonal block A[B_u, B_u] in cluster-local indices.
  SymmetricSparse diagonal_block_sparse(index_t u) const {
    const index_t c = partition_->cluster_size(u);
    SymmetricSparse d(c);
    const Block& b = block(u, u);
    for (std::size_t jl = 0; jl < b.cols.size(); ++jl)
      for (const auto& [r, v] : b.cols[jl].entries())
        if (r <= static_cast<index_t>(jl)) d.accumulate(r, static_cast<index_t>(jl), v);
    d.finalize();
    return d;
  }

  /// a <- q a q^T for a single rotation whose indices all lie in one cluster.
  /// Only block row u and block column u change.
  void apply_rotation_symmetric(const Rotation& rot) {
    const index_t k = rot.order();
    if (k < 2) throw std::invalid_argument("apply_rotation_symmetric: order < 2");
    index_t u = -1;
    std::vector<index_t> local(static_cast<std::size_t>(k));
    for (index_t a = 0; a < k; ++a) {
      auto slot = partition_->locate(rot.indices[static_cast<std::size_t>(a)]);
      if (!slot.valid())
        throw std::out_of_range("apply_rotation_symmetric: index not covered by partition");
      if (u < 0) u = slot.cluster;
      if (slot.cluster != u)
        throw std::invalid_argument("apply_rotation_symmetric: indices span multiple clusters");
      local[static_cast<std::size_t>(a)] = slot.offset;
    }
    // Column side first (a <- a q^T), then row side (a <- q a).
    std::vector<const SparseColumn*> in(static_cast<std::size_t>(k));
    std::vector<SparseColumn> mixed(static_cast<std::size_t>(k));
    for (index_t w = 0; w < m_; ++w) {
      Block& b = block(w, u);
      for (index_t a = 0; a < k; ++a)
        in[static_cast<std::size_t>(a)] = &b.cols[static_cast<std::size_t>(local[static_cast<std::size_t>(a)])];
      combine_columns(in, rot.matrix, mixed);
      for (index_t a = 0; a < k; ++a)
        b.cols[static_cast<std::size_t>(local[static_cast<std::size_t>(a)])] =
            std::move(mixed[static_cast<std::size_t>(a)]);
    }
    std::vector<double> old_vals(static_cast<std::size_t>(k));
    for (index_t v = 0; v < m_; ++v) {
      Block& b = block(u, v);
      for (auto& col : b.cols) {
        bool any = false;
        for (index_t a = 0; a < k; ++a) {
          old_vals[static_cast<std::size_t>(a)] = col.get(local[static_cast<std::size_t>(a)]);
          any = any || col.contains(local[static_cast<std::size_t>(a)]);
        }
        if (!any) continue;
        for (index_t a = 0; a < k; ++a) {
          double acc = 0.0;
          for (index_t bb = 0; bb < k; ++bb) acc += rot.matrix(a, bb) * old_vals[static_cast<std::size_t>(bb)];
          col.set(local[static_cast<std::size_t>(a)], acc);
        }
      }
    }
  }

  /// Two-phase repartition: rows per block column, then columns per block
  /// row. Surviving entries keep bit-identical values; indices absent from
  /// the new partition are removed.
  BlockedSparseMatrix reblock(std::shared_ptr<const Partition> new_partition) const {
    const Partition& np = *new_partition;
    for (index_t u = 0; u < np.num_clusters(); ++u)
      for (index_t g : np.cluster(u))
        if (!partition_->contains(g))
          throw std::invalid_argument("reblock: new partition references an absent index");
    const index_t m_new = np.num_clusters();
    // Phase 1: rows, independently per old block column.
    // inter[v][u_new] holds rows regrouped by the new partition, columns
    // still in old cluster v order.
    std::vector<std::vector<Block>> inter(static_cast<std::size_t>(m_));
    parallel::for_each_index(static_cast<std::size_t>(m_), [&](std::size_t v) {
      auto& slice = inter[v];
      slice.resize(static_cast<std::size_t>(m_new));
      const index_t old_cols = partition_->cluster_size(static_cast<index_t>(v));
      for (index_t un = 0; un < m_new; ++un) {
        slice[static_cast<std::size_t>(un)].nrows = np.cluster_size(un);
        slice[static_cast<std::size_t>(un)].cols.resize(static_cast<std::size_t>(old_cols));
      }
      for (index_t w = 0; w < m_; ++w) {
        const Block& b = block(w, static_cast<index_t>(v));
        auto old_rows = partition_->cluster(w);
        for (std::size_t jl = 0; jl < b.cols.size(); ++jl)
          for (const auto& [r, value] : b.cols[jl].entries()) {
            auto slot = np.locate(old_rows[static_cast<std::size_t>(r)]);
            if (!slot.valid()) continue;
            slice[static_cast<std::size_t>(slot.cluster)].cols[jl].append(slot.offset, value);
          }
      }
      for (auto& nb : slice)
        for (auto& col : nb.cols)
          std::sort(col.entries().begin(), col.entries().end(),
                    [](const auto& a, const auto& b2) { return a.first < b2.first; });
    });
    // Phase 2: columns, independently per new block row.
    BlockedSparseMatrix out(n_, new_partition);
    parallel::for_each_index(static_cast<std::size_t>(m_new), [&](std::size_t un) {
      for (index_t v = 0; v < m_; ++v) {
        Block& src = inter[static_cast<std::size_t>(v)][un];
        auto old_cols = partition_->cluster(v);
        for (std::size_t jl = 0; jl < src.cols.size(); ++jl) {
          auto slot = np.locate(old_cols[jl]);
          if (!slot.valid()) continue;
          out.block(static_cast<index_t>(un), slot.cluster)
              .cols[static_cast<std::size_t>(slot.offset)] = std::move(src.cols[jl]);
        }
      }
    });
    return out;
  }

  BlockedVector multiply(const BlockedVector& x) const {
    if (!(x.partition() == *partition_))
      throw std::invalid_argument("multiply: vector partition mismatch");
    BlockedVector y(partition_);
    parallel::for_each_index(static_cast<std::size_t>(m_), [&](std::size_t u) {
      auto& out = y.segment(static_cast<index_t>(u));
      for (index_t v = 0; v < m_; ++v) {
        const Block& b = block(static_cast<index_t>(u), v);
        const auto& seg = x.segment(v);
        for (std::size_t jl = 0; jl < b.cols.size(); ++jl) {
          const double xj = seg[jl];
          if (xj == 0.0) continue;
          for (const auto& [r, value] : b.cols[jl].entries())
            out[static_cast<std::size_t>(r)] += value * xj;
        }
      }
    });
    return y;
  }

  /// y = A x on flat length-n vectors (global indexing).
  void multiply_flat(std::span<const double> x, std::span<double> y) const {
    if (static_cast<index_t>(x.size()) != n_ || static_cast<index_t>(y.size()) != n_)
      throw std::invalid_argument("multiply_flat: length mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    parallel::for_each_index(static_cast<std::size_t>(m_), [&](std::size_t u) {
      auto rows = partition_->cluster(static_cast<index_t>(u));
      for (index_t v = 0; v < m_; ++v) {
        const Block& b = block(static_cast<index_t>(u), v);
        auto cols = partition_->cluster(v);
        for (std::size_t jl = 0; jl < b.cols.size(); ++jl) {
          const double xj = x[static_cast<std::size_t>(cols[jl])];
          if (xj == 0.0) continue;
          for (const auto& [r, value] : b.cols[jl].entries())
            y[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])] += value * xj;
        }
      }
    });
  }

  /// Iterates column j as (global row, value), ascending block row then row.
  template <typename Fn>
  void for_each_in_column(index_t j, Fn&& fn) const {
    auto c = locate_or_throw(j);
    for (index_t w = 0; w < m_; ++w) {
      auto rows = partition_->cluster(w);
      for (const auto& [r, v] :
           block(w, c.cluster).cols[static_cast<std::size_t>(c.offset)].entries())
        fn(rows[static_cast<std::size_t>(r)], v);
    }
  }

  /// Entries in deterministic (block, column, row) order with global indices.
  std::vector<Triplet> to_triplets() const {
    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(nnz()));
    for (index_t u = 0; u < m_; ++u) {
      auto rows = partition_->cluster(u);
      for (index_t v = 0; v < m_; ++v) {
        auto cols = partition_->cluster(v);
        const Block& b = block(u, v);
        for (std::size_t jl = 0; jl < b.cols.size(); ++jl)
          for (const auto& [r, value] : b.cols[jl].entries())
            out.push_back({rows[static_cast<std::size_t>(r)], cols[jl], value});
      }
    }
    return out;
  }

  double frobenius_norm_sq() const {
    double s = 0.0;
    for (const auto& b : blocks_)
      for (const auto& col : b.cols)
        for (const auto& [r, v] : col.entries()) s += v * v;
    return s;
  }

  /// max |a_ij - a_ji| over stored entries.
  double max_asymmetry() const {
    double worst = 0.0;
    for (index_t u = 0; u < m_; ++u) {
      auto rows = partition_->cluster(u);
      for (index_t v = u; v < m_; ++v) {
        auto cols = partition_->cluster(v);
        const Block& b = block(u, v);
        for (std::size_t jl = 0; jl < b.cols.size(); ++jl)
          for (const auto& [r, value] : b.cols[jl].entries()) {
            const index_t gi = rows[static_cast<std::size_t>(r)];
            const index_t gj = cols[jl];
            worst = std::max(worst, std::abs(value - get(gj, gi)));
          }
      }
    }
    return worst;
  }

 private:
  void init_blocks() {
    m_ = partition_->num_clusters();
    blocks_.assign(static_cast<std::size_t>(m_ * m_), Block{});
    for (index_t u = 0; u < m_; ++u)
      for (index_t v = 0; v < m_; ++v) {
        Block& b = block(u, v);
        b.nrows = partition_->cluster_size(u);
        b.cols.resize(static_cast<std::size_t>(partition_->cluster_size(v)));
      }
  }

  void check_range(index_t i, index_t j) const {
    if (i < 0 || i >= n_ || j < 0 || j >= n_)
      throw std::out_of_range("BlockedSparseMatrix: index out of range");
  }

  Partition::Slot locate_or_throw(index_t j) const {
    if (j < 0 || j >= n_) throw std::out_of_range("BlockedSparseMatrix: index out of range");
    auto slot = partition_->locate(j);
    if (!slot.valid()) throw std::out_of_range("BlockedSparseMatrix: index not covered");
    return slot;
  }

  index_t n_ = 0;
  std::shared_ptr<const Partition> partition_;
  index_t m_ = 0;
  std::vector<Block> blocks_;
};

}  // namespace pmmf
