// SPDX-License-Identifier: Apache-2.0
//
// A partition of a set of global column indices into ordered clusters, with
// constant-time lookup from a global index to its (cluster, offset) slot.
// Clusters need not be contiguous index ranges.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "pmmf/types.hpp"

namespace pmmf {

class Partition {
 public:
  struct Slot {
    index_t cluster = -1;
    index_t offset = -1;
    bool valid() const { return cluster >= 0; }
  };

  Partition() = default;

  /// Takes ownership of the clusters; they must be pairwise disjoint.
  explicit Partition(std::vector<std::vector<index_t>> clusters) : clusters_(std::move(clusters)) {
    index_t max_id = -1;
    for (const auto& cluster : clusters_)
      for (index_t g : cluster) {
        if (g < 0) throw std::invalid_argument("Partition: negative index");
        max_id = std::max(max_id, g);
      }
    lookup_.assign(static_cast<std::size_t>(max_id + 1), Slot{});
    size_ = 0;
    for (std::size_t u = 0; u < clusters_.size(); ++u) {
      for (std::size_t o = 0; o < clusters_[u].size(); ++o) {
        Slot& slot = lookup_[static_cast<std::size_t>(clusters_[u][o])];
        if (slot.valid()) throw std::invalid_argument("Partition: duplicate index across clusters");
        slot = {static_cast<index_t>(u), static_cast<index_t>(o)};
        ++size_;
      }
    }
  }

  /// All indices in one cluster.
  static Partition single(std::vector<index_t> indices) {
    std::vector<std::vector<index_t>> c;
    c.push_back(std::move(indices));
    return Partition(std::move(c));
  }

  /// One cluster holding 0..n-1.
  static Partition trivial(index_t n) {
    std::vector<index_t> ids(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
    return single(std::move(ids));
  }

  index_t num_clusters() const { return static_cast<index_t>(clusters_.size()); }
  index_t size() const { return size_; }

  std::span<const index_t> cluster(index_t u) const { return clusters_[static_cast<std::size_t>(u)]; }
  index_t cluster_size(index_t u) const {
    return static_cast<index_t>(clusters_[static_cast<std::size_t>(u)].size());
  }

  Slot locate(index_t global) const {
    if (global < 0 || static_cast<std::size_t>(global) >= lookup_.size()) return Slot{};
    return lookup_[static_cast<std::size_t>(global)];
  }

  bool contains(index_t global) const { return locate(global).valid(); }

  /// Every covered index, ascending.
  std::vector<index_t> all_indices() const {
    std::vector<index_t> out;
    out.reserve(static_cast<std::size_t>(size_));
    for (std::size_t g = 0; g < lookup_.size(); ++g)
      if (lookup_[g].valid()) out.push_back(static_cast<index_t>(g));
    return out;
  }

  bool operator==(const Partition& other) const { return clusters_ == other.clusters_; }

 private:
  std::vector<std::vector<index_t>> clusters_;
  std::vector<Slot> lookup_;
  index_t size_ = 0;
};

}  // namespace pmmf
