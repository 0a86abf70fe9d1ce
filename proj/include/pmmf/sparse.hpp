// SPDX-License-Identifier: Apache-2.0
//
// Sparse building blocks: a sorted sparse column and a symmetric sparse
// matrix with column access from both sides. Entries touched by a rotation
// are kept even when they become zero; nothing is dropped implicitly.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pmmf/dense.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

/// A sparse vector stored as (index, value) pairs sorted by index.
class SparseColumn {
 public:
  using Entry = std::pair<index_t, double>;

  SparseColumn() = default;

  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  void clear() { entries_.clear(); }

  double get(index_t i) const {
    auto it = lower_bound(i);
    return (it != entries_.end() && it->first == i) ? it->second : 0.0;
  }

  bool contains(index_t i) const {
    auto it = lower_bound(i);
    return it != entries_.end() && it->first == i;
  }

  void set(index_t i, double v) {
    auto it = lower_bound(i);
    if (it != entries_.end() && it->first == i) {
      it->second = v;
    } else {
      entries_.insert(it, {i, v});
    }
  }

  void add(index_t i, double v) {
    auto it = lower_bound(i);
    if (it != entries_.end() && it->first == i) {
      it->second += v;
    } else {
      entries_.insert(it, {i, v});
    }
  }

  void append(index_t i, double v) { entries_.emplace_back(i, v); }

  /// Sorts appended entries and sums duplicates in their append order.
  void compress() {
    std::stable_sort(entries_.begin(), entries_.end(),
                     [](const Entry& a, const Entry& b) { return a.first < b.first; });
    std::size_t out = 0;
    for (std::size_t i = 0; i < entries_.size();) {
      index_t idx = entries_[i].first;
      double sum = entries_[i].second;
      std::size_t j = i + 1;
      while (j < entries_.size() && entries_[j].first == idx) sum += entries_[j++].second;
      entries_[out++] = {idx, sum};
      i = j;
    }
    entries_.resize(out);
  }

  double dot(const SparseColumn& other) const {
    double s = 0.0;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() && b != other.entries_.end()) {
      if (a->first < b->first) {
        ++a;
      } else if (b->first < a->first) {
        ++b;
      } else {
        s += a->second * b->second;
        ++a;
        ++b;
      }
    }
    return s;
  }

  double norm_sq() const {
    double s = 0.0;
    for (const auto& [i, v] : entries_) s += v * v;
    return s;
  }

  friend bool operator==(const SparseColumn&, const SparseColumn&) = default;

 private:
  std::vector<Entry>::const_iterator lower_bound(index_t i) const {
    return std::lower_bound(entries_.begin(), entries_.end(), i,
                            [](const Entry& e, index_t key) { return e.first < key; });
  }
  std::vector<Entry>::iterator lower_bound(index_t i) {
    return std::lower_bound(entries_.begin(), entries_.end(), i,
                            [](const Entry& e, index_t key) { return e.first < key; });
  }

  std::vector<Entry> entries_;
};

/// Replaces the k input columns by their mix under q: out_a = sum_b q(a,b) in_b.
/// The output support is the union of the input supports; zeros produced by
/// the mix stay stored.
inline void combine_columns(std::span<const SparseColumn* const> in, const DenseMatrix& q,
                            std::span<SparseColumn> out) {
  const std::size_t k = in.size();
  std::vector<std::size_t> cursor(k, 0);
  for (std::size_t a = 0; a < k; ++a) {
    out[a].clear();
    std::size_t cap = 0;
    for (std::size_t b = 0; b < k; ++b) cap += in[b]->nnz();
    out[a].entries().reserve(cap);
  }
  std::vector<double> vals(k);
  for (;;) {
    index_t row = -1;
    for (std::size_t b = 0; b < k; ++b) {
      const auto& e = in[b]->entries();
      if (cursor[b] < e.size() && (row < 0 || e[cursor[b]].first < row)) row = e[cursor[b]].first;
    }
    if (row < 0) break;
    for (std::size_t b = 0; b < k; ++b) {
      const auto& e = in[b]->entries();
      if (cursor[b] < e.size() && e[cursor[b]].first == row) {
        vals[b] = e[cursor[b]].second;
        ++cursor[b];
      } else {
        vals[b] = 0.0;
      }
    }
    for (std::size_t a = 0; a < k; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < k; ++b) acc += q(static_cast<index_t>(a), static_cast<index_t>(b)) * vals[b];
      out[a].append(row, acc);
    }
  }
}

/// Symmetric sparse matrix in local indices [0, dim). Both (i,j) and (j,i)
/// are stored so rows are reachable through columns; the diagonal is cached
/// densely. Used for per-cluster Gram matrices and diagonal blocks.
class SymmetricSparse {
 public:
  SymmetricSparse() = default;
  explicit SymmetricSparse(index_t dim)
      : cols_(static_cast<std::size_t>(dim)), diag_(static_cast<std::size_t>(dim), 0.0) {}

  index_t dim() const { return static_cast<index_t>(cols_.size()); }
  double diag(index_t i) const { return diag_[static_cast<std::size_t>(i)]; }
  const SparseColumn& column(index_t i) const { return cols_[static_cast<std::size_t>(i)]; }

  double get(index_t i, index_t j) const {
    if (i == j) return diag(i);
    return cols_[static_cast<std::size_t>(j)].get(i);
  }

  /// Build phase: records (i,j) and, when i != j, its mirror.
  void accumulate(index_t i, index_t j, double v) {
    cols_[static_cast<std::size_t>(j)].append(i, v);
    if (i != j) cols_[static_cast<std::size_t>(i)].append(j, v);
  }

  void finalize() {
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      cols_[j].compress();
      diag_[j] = cols_[j].get(static_cast<index_t>(j));
    }
  }

  /// a <- q a q^T on the given local indices (q is k x k orthogonal).
  void rotate(std::span<const index_t> idx, const DenseMatrix& q) {
    const std::size_t k = idx.size();
    // Old corner among the rotated indices.
    DenseMatrix corner(static_cast<index_t>(k), static_cast<index_t>(k));
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        corner(static_cast<index_t>(a), static_cast<index_t>(b)) = get(idx[a], idx[b]);
    // New columns over the union support, corner rows handled separately.
    std::vector<const SparseColumn*> in(k);
    for (std::size_t b = 0; b < k; ++b) in[b] = &cols_[static_cast<std::size_t>(idx[b])];
    std::vector<SparseColumn> mixed(k);
    combine_columns(in, q, mixed);
    const DenseMatrix new_corner = q.multiply(corner).multiply(q.transposed());
    // Write back the rotated columns, replacing corner rows with the exact
    // conjugated corner.
    std::vector<index_t> sorted_idx(idx.begin(), idx.end());
    std::sort(sorted_idx.begin(), sorted_idx.end());
    for (std::size_t a = 0; a < k; ++a) {
      SparseColumn& dst = cols_[static_cast<std::size_t>(idx[a])];
      dst.clear();
      dst.entries().reserve(mixed[a].nnz() + k);
      std::size_t next_corner = 0;
      auto flush_corner_until = [&](index_t row) {
        while (next_corner < k && sorted_idx[next_corner] < row) {
          const index_t gi = sorted_idx[next_corner];
          // position of gi within idx
          std::size_t pos = 0;
          while (idx[pos] != gi) ++pos;
          dst.append(gi, new_corner(static_cast<index_t>(pos), static_cast<index_t>(a)));
          ++next_corner;
        }
      };
      for (const auto& [row, value] : mixed[a].entries()) {
        if (std::find(idx.begin(), idx.end(), row) != idx.end()) continue;
        flush_corner_until(row);
        dst.append(row, value);
      }
      flush_corner_until(dim());
    }
    // Mirror the off-corner updates into the rows of the touched columns.
    // combine_columns gives every output column the same support, so entry t
    // of mixed[a] refers to the same row for every a.
    const auto& support = mixed[0].entries();
    for (std::size_t t = 0; t < support.size(); ++t) {
      const index_t row = support[t].first;
      if (std::find(idx.begin(), idx.end(), row) != idx.end()) continue;
      SparseColumn& crossed = cols_[static_cast<std::size_t>(row)];
      for (std::size_t a = 0; a < k; ++a) crossed.set(idx[a], mixed[a].entries()[t].second);
    }
    for (std::size_t a = 0; a < k; ++a)
      diag_[static_cast<std::size_t>(idx[a])] =
          new_corner(static_cast<index_t>(a), static_cast<index_t>(a));
  }

  double frobenius_norm_sq() const {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_.size(); ++j)
      for (const auto& [i, v] : cols_[j].entries()) s += v * v;
    return s;
  }

 private:
  std::vector<SparseColumn> cols_;
  std::vector<double> diag_;
};

}  // namespace pmmf
