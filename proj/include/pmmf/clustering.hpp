// SPDX-License-Identifier: Apache-2.0
//
// Randomized anchor clustering of active columns. Anchors are drawn uniformly
// at random; every other column joins the anchor with the highest normalized
// inner product, with columns scoring zero everywhere spread round-robin to
// keep the clustering approximately even. Undersized clusters are dissolved
// and redistributed first, then oversized clusters are re-clustered
// recursively. Zero-norm columns bypass the stage when the bypass flag is
// set; they can contribute nothing to a rotation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pmmf/blocked_matrix.hpp"
#include "pmmf/parallel.hpp"
#include "pmmf/partition.hpp"
#include "pmmf/rng.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

struct ClusterParams {
  index_t m_target = 2;
  index_t c_min = 10;
  index_t c_max = 5000;
  int d_max = 500;
  bool bypass_enabled = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (m_target < 1) throw std::invalid_argument("ClusterParams: m_target < 1");
    if (c_min > c_max) throw std::invalid_argument("ClusterParams: c_min > c_max");
    if (d_max < 0) throw std::invalid_argument("ClusterParams: d_max < 0");
  }
};

struct ClusterOutcome {
  Partition partition;            // clusters over the placed columns
  std::vector<index_t> bypassed;  // columns receiving no rotations this stage
  int max_depth = 0;              // deepest re-clustering recursion reached
};

namespace detail {

struct ClusterScratch {
  const BlockedSparseMatrix* matrix = nullptr;
  const std::vector<double>* norm_by_global = nullptr;  // indexed by global id
  const ClusterParams* params = nullptr;
  std::vector<index_t>* bypassed = nullptr;
  int max_depth = 0;

  double norm(index_t g) const { return (*norm_by_global)[static_cast<std::size_t>(g)]; }
};

// |<A_j, A_a>| / (||A_j|| ||A_a||); zero when either norm vanishes.
inline double normalized_score(const ClusterScratch& ctx, index_t j, index_t anchor) {
  const double nj = ctx.norm(j);
  const double na = ctx.norm(anchor);
  if (nj <= 0.0 || na <= 0.0) return 0.0;
  return std::abs(ctx.matrix->column_dot(j, anchor)) / (nj * na);
}

// Best anchor for column j: highest score, ties to the lowest anchor index.
// Returns {anchor position, score}; score 0 means no positive score.
inline std::pair<std::size_t, double> best_anchor(const ClusterScratch& ctx, index_t j,
                                                  std::span<const index_t> anchors) {
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const double s = normalized_score(ctx, j, anchors[a]);
    if (s > best_score) {
      best_score = s;
      best = a;
    }
  }
  return {best, best_score};
}

inline void cluster_recursive(ClusterScratch& ctx, std::vector<index_t> pool, index_t m_request,
                              int depth, Rng& rng, std::vector<std::vector<index_t>>& out) {
  ctx.max_depth = std::max(ctx.max_depth, depth);
  if (pool.empty()) return;
  // Anchors are drawn uniformly without replacement from the columns with
  // nonzero norm (a zero column cannot attract anything).
  std::vector<index_t> shuffled;
  shuffled.reserve(pool.size());
  for (index_t g : pool)
    if (ctx.norm(g) > 0.0) shuffled.push_back(g);
  if (shuffled.empty()) {
    // Degenerate pool of zero columns with bypass disabled: keep it whole.
    out.push_back(std::move(pool));
    return;
  }
  const auto m = static_cast<std::size_t>(
      std::min<index_t>(m_request, static_cast<index_t>(shuffled.size())));
  for (std::size_t t = 0; t < m; ++t) {
    const std::size_t pick = t + static_cast<std::size_t>(rng.uniform_below(shuffled.size() - t));
    std::swap(shuffled[t], shuffled[pick]);
  }
  std::vector<index_t> anchors(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(anchors.begin(), anchors.end());

  // Score every pool column against the anchors; anchors keep themselves.
  // Columns orthogonal to every anchor (score 0 everywhere) are spread
  // round-robin in index order so the clustering stays approximately even;
  // piling them on one anchor would defeat the blocking on sparse graphs,
  // where most columns see no anchor within their support.
  constexpr std::size_t kUnscored = static_cast<std::size_t>(-1);
  std::vector<std::size_t> assignment(pool.size());
  parallel::for_each_index(pool.size(), [&](std::size_t p) {
    const index_t j = pool[p];
    auto anchor_it = std::lower_bound(anchors.begin(), anchors.end(), j);
    if (anchor_it != anchors.end() && *anchor_it == j) {
      assignment[p] = static_cast<std::size_t>(anchor_it - anchors.begin());
      return;
    }
    auto [a, score] = best_anchor(ctx, j, anchors);
    assignment[p] = score > 0.0 ? a : kUnscored;
  });

  std::vector<std::vector<index_t>> clusters(m);
  std::size_t round_robin = 0;
  for (std::size_t p = 0; p < pool.size(); ++p) {
    std::size_t a = assignment[p];
    if (a == kUnscored) a = (round_robin++) % m;
    clusters[a].push_back(pool[p]);  // pool ascending => members ascending
  }

  // Undersize repair: dissolve the smallest offender and redistribute its
  // members among the remaining anchors until every survivor has c_min
  // members (or only one cluster is left).
  std::vector<std::size_t> alive;
  for (std::size_t a = 0; a < m; ++a) alive.push_back(a);
  while (alive.size() > 1) {
    std::size_t worst = alive[0];
    for (std::size_t a : alive)
      if (clusters[a].size() < clusters[worst].size()) worst = a;
    if (static_cast<index_t>(clusters[worst].size()) >= ctx.params->c_min) break;
    alive.erase(std::find(alive.begin(), alive.end(), worst));
    std::vector<index_t> orphans = std::move(clusters[worst]);
    clusters[worst].clear();
    std::vector<index_t> remaining;
    for (std::size_t a : alive) remaining.push_back(anchors[a]);
    constexpr std::size_t kUnscoredOrphan = static_cast<std::size_t>(-1);
    std::vector<std::size_t> re_assignment(orphans.size());
    parallel::for_each_index(orphans.size(), [&](std::size_t p) {
      auto [a, score] = best_anchor(ctx, orphans[p], remaining);
      re_assignment[p] = score > 0.0 ? a : kUnscoredOrphan;
    });
    std::size_t orphan_rr = 0;
    for (std::size_t p = 0; p < orphans.size(); ++p) {
      std::size_t a = re_assignment[p];
      if (a == kUnscoredOrphan) a = (orphan_rr++) % alive.size();
      clusters[alive[a]].push_back(orphans[p]);
    }
    for (std::size_t a : alive) std::sort(clusters[a].begin(), clusters[a].end());
  }

  // Oversize repair: re-cluster recursively with ceil(size / c_max) anchors.
  for (std::size_t a : alive) {
    auto& members = clusters[a];
    if (members.empty()) continue;
    if (static_cast<index_t>(members.size()) > ctx.params->c_max && depth < ctx.params->d_max) {
      const index_t sub_m =
          (static_cast<index_t>(members.size()) + ctx.params->c_max - 1) / ctx.params->c_max;
      cluster_recursive(ctx, std::move(members), sub_m, depth + 1, rng, out);
    } else {
      out.push_back(std::move(members));
    }
  }
}

}  // namespace detail

/// Clusters the active columns of a matrix. Deterministic for a fixed seed
/// and input, independent of the worker count.
inline ClusterOutcome cluster_columns(const BlockedSparseMatrix& matrix,
                                      std::span<const index_t> active,
                                      const ClusterParams& params) {
  params.validate();
  if (active.empty()) throw std::invalid_argument("cluster_columns: empty active set");

  std::vector<double> norm_by_global(static_cast<std::size_t>(matrix.dim()), 0.0);
  std::vector<index_t> active_sorted(active.begin(), active.end());
  std::sort(active_sorted.begin(), active_sorted.end());
  parallel::for_each_index(active_sorted.size(), [&](std::size_t p) {
    norm_by_global[static_cast<std::size_t>(active_sorted[p])] =
        std::sqrt(matrix.column_norm_sq(active_sorted[p]));
  });

  ClusterOutcome outcome;
  detail::ClusterScratch ctx;
  ctx.matrix = &matrix;
  ctx.norm_by_global = &norm_by_global;
  ctx.params = &params;
  ctx.bypassed = &outcome.bypassed;

  // Zero-norm columns contribute nothing to any rotation; with bypass on
  // they skip the stage outright, otherwise they fall through to the
  // lowest-anchor rule like any other unscorable column.
  std::vector<index_t> pool;
  pool.reserve(active_sorted.size());
  for (index_t g : active_sorted) {
    if (!params.bypass_enabled || norm_by_global[static_cast<std::size_t>(g)] > 0.0)
      pool.push_back(g);
    else
      outcome.bypassed.push_back(g);
  }

  std::vector<std::vector<index_t>> clusters;
  if (!pool.empty()) {
    Rng rng(params.seed);
    detail::cluster_recursive(ctx, std::move(pool), params.m_target, 0, rng, clusters);
  }
  std::sort(outcome.bypassed.begin(), outcome.bypassed.end());
  outcome.partition = Partition(std::move(clusters));
  outcome.max_depth = ctx.max_depth;
  return outcome;
}

}  // namespace pmmf
