// SPDX-License-Identifier: Apache-2.0
//
// Multiresolution factorization driver. Each stage clusters the active
// columns, reblocks the matrix to the clustering, finds rotations inside
// every cluster by randomized greedy search on the cluster Gram matrix,
// applies all stage rotations block-parallel, and retires one index per
// rotation from the active set. The survivors of the last stage form the
// dense core; every retired index keeps its final diagonal value.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmmf/blocked_matrix.hpp"
#include "pmmf/clustering.hpp"
#include "pmmf/dense.hpp"
#include "pmmf/parallel.hpp"
#include "pmmf/partition.hpp"
#include "pmmf/rng.hpp"
#include "pmmf/rotation.hpp"
#include "pmmf/sparse.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

struct FactorizeParams {
  int k = 2;            // rotation order; 2 = Givens
  int n_stages = 15;    // maximum number of stages
  double eta = 0.5;     // rotations per cluster of size c: floor(eta * c)
  ClusterParams cluster;
  index_t core_min = 10;    // stop once the active set is this small
  index_t core_cap = 4096;  // refuse to densify a core beyond this
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 2 || k > 8) throw std::invalid_argument("FactorizeParams: k must be in [2, 8]");
    if (n_stages < 1) throw std::invalid_argument("FactorizeParams: n_stages < 1");
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("FactorizeParams: eta not in (0,1)");
    if (core_min < 1) throw std::invalid_argument("FactorizeParams: core_min < 1");
    cluster.validate();
  }
};

/// One retired index: its frozen diagonal value and the squared off-diagonal
/// mass (restricted to indices still active at retirement) it carried into
/// the residual.
struct Elimination {
  index_t index = -1;
  double diagonal = 0.0;
  double off_mass_sq = 0.0;

  friend bool operator==(const Elimination&, const Elimination&) = default;
};

/// All rotations found under one clustering.
struct Stage {
  std::shared_ptr<const Partition> partition;
  std::vector<Rotation> rotations;      // cluster-major, per-cluster order
  std::vector<Elimination> eliminated;  // stage elimination order
  std::vector<index_t> bypassed;
};

struct CoreDiagonal {
  std::vector<index_t> core_indices;  // ascending: the final active set
  DenseMatrix core;
  std::vector<std::pair<index_t, double>> diagonal;  // retired index -> value, ascending

  double diagonal_value(index_t i) const {
    auto it = std::lower_bound(diagonal.begin(), diagonal.end(), i,
                               [](const auto& e, index_t key) { return e.first < key; });
    if (it == diagonal.end() || it->first != i)
      throw std::out_of_range("CoreDiagonal: index not retired");
    return it->second;
  }
};

struct PhaseTimings {
  double clustering_ms = 0.0;
  double gram_ms = 0.0;
  double rotations_ms = 0.0;
  double apply_ms = 0.0;
  double reblocking_ms = 0.0;
  double total_ms = 0.0;
};

struct StageInfo {
  int stage = 0;
  index_t clusters = 0;
  index_t bypassed = 0;
  index_t rotations = 0;
  index_t eliminated = 0;
  index_t active_after = 0;
  int cluster_recursion_depth = 0;
};

struct FactorizeStats {
  PhaseTimings phases;
  std::vector<StageInfo> stages;
  bool trivial = false;  // input no larger than core_min; H is the input
};

struct MmfFactorization {
  index_t n = 0;
  std::vector<Stage> stages;
  CoreDiagonal h;
  double residual_sq = 0.0;
  std::vector<index_t> active_history;  // |S_0|, |S_1|, ..., |S_L|
  FactorizeParams params;
};

/// Squared off-diagonal norm of a column from its norm and diagonal entry;
/// small negative round-off is clamped to zero.
inline double off_diag_norm_sq(double column_norm_sq, double diag_entry) {
  return std::max(0.0, column_norm_sq - diag_entry * diag_entry);
}

namespace detail {

// Flips eigenvector rows so each row's first largest-magnitude entry is
// positive; keeps the output deterministic across equivalent diagonalizers.
inline void fix_row_signs(DenseMatrix& q) {
  for (index_t i = 0; i < q.rows(); ++i) {
    index_t arg = 0;
    double best = std::abs(q(i, 0));
    for (index_t j = 1; j < q.cols(); ++j) {
      const double m = std::abs(q(i, j));
      if (m > best) {
        best = m;
        arg = j;
      }
    }
    if (q(i, arg) < 0.0)
      for (index_t j = 0; j < q.cols(); ++j) q(i, j) = -q(i, j);
  }
}

}  // namespace detail

/// Orthogonal q with q * g_sub * q^T diagonal. k = 2 uses the closed-form
/// angle; larger k runs cyclic Jacobi sweeps on the k x k block.
inline DenseMatrix rotation_from_gram(const DenseMatrix& g_sub) {
  const index_t k = g_sub.rows();
  if (k != g_sub.cols() || k < 1) throw std::invalid_argument("rotation_from_gram: not square");
  if (g_sub.max_asymmetry() > 1e-9 * std::max(1.0, g_sub.max_abs()))
    throw std::invalid_argument("rotation_from_gram: input not symmetric");
  DenseMatrix work(k, k);
  for (index_t i = 0; i < k; ++i)
    for (index_t j = 0; j < k; ++j) work(i, j) = 0.5 * (g_sub(i, j) + g_sub(j, i));
  DenseMatrix q;
  if (k == 2) {
    const auto [c, s] = detail::jacobi_angle(work(0, 0), work(1, 1), work(0, 1));
    q = DenseMatrix(2, 2);
    q(0, 0) = c;
    q(0, 1) = -s;
    q(1, 0) = s;
    q(1, 1) = c;
  } else {
    q = jacobi_diagonalize(work);
  }
  detail::fix_row_signs(q);
  return q;
}

/// Controls for the per-cluster randomized greedy search.
struct RotationSearch {
  int k = 2;
  double eta = 0.5;
  index_t elimination_cap = -1;  // < 0: no cap beyond floor(eta * c)
  std::uint64_t seed = 0;
  int stage = 0;
};

struct ClusterElimination {
  index_t global_index = -1;
  index_t local_index = -1;
  double diagonal = 0.0;     // diagonal entry at elimination time
  double off_mass_sq = 0.0;  // active-restricted mass as seen by the cluster
};

struct ClusterRotations {
  std::vector<Rotation> rotations;
  std::vector<ClusterElimination> eliminated;
};

namespace detail {

// The search proper, on a precomputed Gram matrix and diagonal block, both in
// cluster-local indices. gram and diag_block are consumed.
inline ClusterRotations search_rotations(std::span<const index_t> members, SymmetricSparse& gram,
                                         SymmetricSparse& diag_block,
                                         const RotationSearch& search) {
  const index_t c = static_cast<index_t>(members.size());
  const index_t k = search.k;
  ClusterRotations result;
  if (c < k) return result;  // undersized cluster: no rotations, bypasses
  index_t budget = static_cast<index_t>(std::floor(search.eta * static_cast<double>(c)));
  if (search.elimination_cap >= 0) budget = std::min(budget, search.elimination_cap);
  if (budget <= 0) return result;
  result.rotations.reserve(static_cast<std::size_t>(budget));
  result.eliminated.reserve(static_cast<std::size_t>(budget));

  Rng rng(search.seed);
  std::vector<index_t> active(members.size());
  for (index_t i = 0; i < c; ++i) active[static_cast<std::size_t>(i)] = i;
  std::vector<std::uint8_t> is_active(members.size(), 1);
  std::vector<index_t> scratch;

  auto eliminate = [&](index_t local) {
    // Active-restricted mass: the column energy minus the diagonal and minus
    // entries to rows this cluster already retired.
    double retired_sq = 0.0;
    for (const auto& [l, v] : diag_block.column(local).entries())
      if (l != local && !is_active[static_cast<std::size_t>(l)]) retired_sq += v * v;
    const double mass =
        std::max(0.0, off_diag_norm_sq(gram.diag(local), diag_block.diag(local)) - retired_sq);
    result.eliminated.push_back(
        {members[static_cast<std::size_t>(local)], local, diag_block.diag(local), mass});
    is_active[static_cast<std::size_t>(local)] = 0;
    active.erase(std::lower_bound(active.begin(), active.end(), local));
  };

  for (index_t s = 0; s < budget; ++s) {
    if (static_cast<index_t>(active.size()) <= k - 1) break;
    const index_t draw = active[static_cast<std::size_t>(rng.uniform_below(active.size()))];
    if (gram.diag(draw) <= 0.0) {
      // A vanished column carries no off-diagonal mass; retire it outright.
      eliminate(draw);
      continue;
    }
    // Partners: highest |<a_i, a_j>| / ||a_j|| over the active set, ties to
    // the lowest index. Columns orthogonal to everything pair with the
    // lowest-index active column.
    scratch.clear();
    if (k == 2) {
      index_t best = -1;
      double best_score = 0.0;
      for (const auto& [l, g] : gram.column(draw).entries()) {
        if (l == draw || !is_active[static_cast<std::size_t>(l)]) continue;
        const double nl = gram.diag(l);
        if (nl <= 0.0) continue;
        const double score = g * g / nl;
        if (score > best_score) {
          best_score = score;
          best = l;
        }
      }
      if (best < 0) best = (active[0] == draw) ? active[1] : active[0];
      scratch.push_back(best);
    } else {
      std::vector<std::pair<double, index_t>> candidates;
      for (const auto& [l, g] : gram.column(draw).entries()) {
        if (l == draw || !is_active[static_cast<std::size_t>(l)]) continue;
        const double nl = gram.diag(l);
        if (nl <= 0.0) continue;
        const double score = g * g / nl;
        if (score > 0.0) candidates.emplace_back(score, l);
      }
      std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (const auto& [score, l] : candidates) {
        if (static_cast<index_t>(scratch.size()) == k - 1) break;
        scratch.push_back(l);
      }
      for (index_t l : active) {
        if (static_cast<index_t>(scratch.size()) == k - 1) break;
        if (l != draw && std::find(scratch.begin(), scratch.end(), l) == scratch.end())
          scratch.push_back(l);
      }
    }

    std::vector<index_t> locals;
    locals.reserve(static_cast<std::size_t>(k));
    locals.push_back(draw);
    locals.insert(locals.end(), scratch.begin(), scratch.end());

    DenseMatrix g_sub(k, k);
    for (index_t a = 0; a < k; ++a)
      for (index_t b = 0; b < k; ++b)
        g_sub(a, b) = gram.get(locals[static_cast<std::size_t>(a)], locals[static_cast<std::size_t>(b)]);
    Rotation rot;
    rot.matrix = rotation_from_gram(g_sub);
    rot.stage = search.stage;
    rot.indices.reserve(static_cast<std::size_t>(k));
    for (index_t l : locals) rot.indices.push_back(members[static_cast<std::size_t>(l)]);

    gram.rotate(locals, rot.matrix);
    diag_block.rotate(locals, rot.matrix);

    // Retire the rotated index with the smallest full off-diagonal norm;
    // the randomly drawn index wins only on strict inequality.
    index_t victim = -1;
    double victim_norm = 0.0;
    for (std::size_t a = 1; a < locals.size(); ++a) {
      const index_t l = locals[a];
      const double off = off_diag_norm_sq(gram.diag(l), diag_block.diag(l));
      if (victim < 0 || off < victim_norm) {
        victim = l;
        victim_norm = off;
      }
    }
    const double draw_off = off_diag_norm_sq(gram.diag(draw), diag_block.diag(draw));
    if (draw_off < victim_norm) victim = draw;

    result.rotations.push_back(std::move(rot));
    eliminate(victim);
  }
  return result;
}

}  // namespace detail

/// Randomized greedy rotation search inside one cluster (the cluster Gram is
/// computed here once and updated under each rotation). The matrix itself is
/// not modified; apply the returned rotations with stage_apply_all_blocks.
inline ClusterRotations find_rotations_in_cluster(const BlockedSparseMatrix& a, index_t u,
                                                  const RotationSearch& search) {
  SymmetricSparse gram = a.gram_of_cluster_sparse(u);
  SymmetricSparse diag_block = a.diagonal_block_sparse(u);
  return detail::search_rotations(a.partition().cluster(u), gram, diag_block, search);
}

/// Applies every rotation of a stage to every block: block (u,v) becomes
/// Q_u [A]_{u,v} Q_v^T. Parallel over the m^2 blocks; each block is touched
/// by exactly one worker.
inline void stage_apply_all_blocks(BlockedSparseMatrix& a, const Stage& stage) {
  const Partition& part = a.partition();
  const index_t m = part.num_clusters();
  // Group rotations by cluster with precomputed local indices.
  struct LocalRotation {
    const DenseMatrix* q;
    std::vector<index_t> locals;
  };
  std::vector<std::vector<LocalRotation>> by_cluster(static_cast<std::size_t>(m));
  for (const Rotation& rot : stage.rotations) {
    if (rot.order() < 2) throw std::invalid_argument("stage_apply_all_blocks: bad rotation");
    index_t u = -1;
    std::vector<index_t> locals;
    locals.reserve(rot.indices.size());
    for (index_t g : rot.indices) {
      auto slot = part.locate(g);
      if (!slot.valid())
        throw std::invalid_argument("stage_apply_all_blocks: rotation index not in partition");
      if (u < 0) u = slot.cluster;
      if (slot.cluster != u)
        throw std::invalid_argument("stage_apply_all_blocks: rotation spans clusters");
      locals.push_back(slot.offset);
    }
    by_cluster[static_cast<std::size_t>(u)].push_back({&rot.matrix, std::move(locals)});
  }

  auto mix_in_place = [](std::vector<SparseColumn>& cols, const LocalRotation& lr) {
    const std::size_t k = lr.locals.size();
    std::vector<const SparseColumn*> in(k);
    for (std::size_t b = 0; b < k; ++b) in[b] = &cols[static_cast<std::size_t>(lr.locals[b])];
    std::vector<SparseColumn> mixed(k);
    combine_columns(in, *lr.q, mixed);
    for (std::size_t b = 0; b < k; ++b)
      cols[static_cast<std::size_t>(lr.locals[b])] = std::move(mixed[b]);
  };

  parallel::for_each_index(static_cast<std::size_t>(m * m), [&](std::size_t t) {
    const index_t u = static_cast<index_t>(t) / m;
    const index_t v = static_cast<index_t>(t) % m;
    const auto& row_rots = by_cluster[static_cast<std::size_t>(u)];
    const auto& col_rots = by_cluster[static_cast<std::size_t>(v)];
    if (row_rots.empty() && col_rots.empty()) return;
    BlockedSparseMatrix::Block& block = a.block(u, v);
    // Column side: A <- A Q_v^T, one rotation at a time in stage order.
    for (const auto& lr : col_rots) mix_in_place(block.cols, lr);
    // Row side: A <- Q_u A, on the transposed block.
    if (!row_rots.empty()) {
      std::vector<SparseColumn> rows(static_cast<std::size_t>(block.nrows));
      for (std::size_t jl = 0; jl < block.cols.size(); ++jl)
        for (const auto& [r, value] : block.cols[jl].entries())
          rows[static_cast<std::size_t>(r)].append(static_cast<index_t>(jl), value);
      for (const auto& lr : row_rots) mix_in_place(rows, lr);
      for (auto& col : block.cols) col.clear();
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (const auto& [jl, value] : rows[r].entries())
          block.cols[static_cast<std::size_t>(jl)].append(static_cast<index_t>(r), value);
    }
  });
}

/// Full parallel multiresolution factorization of a symmetric matrix.
inline MmfFactorization factorize(const BlockedSparseMatrix& input, const FactorizeParams& params,
                                  FactorizeStats* stats_out = nullptr) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  params.validate();
  if (input.dim() < 1) throw std::invalid_argument("factorize: empty matrix");
  {
    const double scale = std::sqrt(input.frobenius_norm_sq());
    if (input.max_asymmetry() > 1e-9 * std::max(scale, 1e-300))
      throw std::invalid_argument("factorize: input matrix is not symmetric");
  }

  const auto run_start = clock::now();
  FactorizeStats stats;
  MmfFactorization f;
  f.n = input.dim();
  f.params = params;

  BlockedSparseMatrix a = input;  // working copy, transformed in place
  std::vector<index_t> active = a.partition().all_indices();
  f.active_history.push_back(static_cast<index_t>(active.size()));

  // Bookkeeping sized by the global dimension.
  std::vector<std::uint8_t> is_active(static_cast<std::size_t>(f.n), 0);
  std::vector<index_t> elim_rank(static_cast<std::size_t>(f.n), -1);
  for (index_t g : active) is_active[static_cast<std::size_t>(g)] = 1;

  std::vector<std::pair<index_t, double>> retired_diagonal;

  if (static_cast<index_t>(active.size()) <= params.core_min) stats.trivial = true;

  for (int stage_no = 1; stage_no <= params.n_stages && !stats.trivial; ++stage_no) {
    if (static_cast<index_t>(active.size()) <= params.core_min) break;

    // Cluster the active columns.
    auto t0 = clock::now();
    ClusterParams cp = params.cluster;
    cp.seed = Rng::derive(params.seed, {0xC1u, static_cast<std::uint64_t>(stage_no)});
    ClusterOutcome outcome = cluster_columns(a, active, cp);
    stats.phases.clustering_ms += ms_since(t0);

    const index_t rotation_clusters = outcome.partition.num_clusters();
    std::vector<std::vector<index_t>> stage_clusters;
    stage_clusters.reserve(static_cast<std::size_t>(rotation_clusters) + 1);
    for (index_t u = 0; u < rotation_clusters; ++u) {
      auto c = outcome.partition.cluster(u);
      stage_clusters.emplace_back(c.begin(), c.end());
    }
    if (!outcome.bypassed.empty()) stage_clusters.push_back(outcome.bypassed);

    Stage stage;
    stage.partition = std::make_shared<const Partition>(std::move(stage_clusters));
    stage.bypassed = outcome.bypassed;

    // Reblock to the stage clustering; indices retired in earlier stages
    // leave the matrix here.
    t0 = clock::now();
    a = a.reblock(stage.partition);
    stats.phases.reblocking_ms += ms_since(t0);

    // Elimination budgets: floor(eta * c) per cluster, trimmed so the global
    // active set cannot sink below core_min. Trimming removes from the
    // largest budget first (ties to the lowest cluster) so a serial run and
    // any parallel run retire the same indices.
    std::vector<index_t> budgets(static_cast<std::size_t>(rotation_clusters), 0);
    index_t planned = 0;
    for (index_t u = 0; u < rotation_clusters; ++u) {
      const index_t c = stage.partition->cluster_size(u);
      index_t b = (c < params.k) ? 0 : static_cast<index_t>(std::floor(params.eta * static_cast<double>(c)));
      b = std::min(b, std::max<index_t>(0, c - (params.k - 1)));
      budgets[static_cast<std::size_t>(u)] = b;
      planned += b;
    }
    const index_t allowance = std::max<index_t>(0, static_cast<index_t>(active.size()) - params.core_min);
    while (planned > allowance) {
      index_t arg = 0;
      for (index_t u = 1; u < rotation_clusters; ++u)
        if (budgets[static_cast<std::size_t>(u)] > budgets[static_cast<std::size_t>(arg)]) arg = u;
      --budgets[static_cast<std::size_t>(arg)];
      --planned;
    }

    // Per-cluster Gram matrices and diagonal blocks.
    t0 = clock::now();
    std::vector<SymmetricSparse> grams(static_cast<std::size_t>(rotation_clusters));
    std::vector<SymmetricSparse> diag_blocks(static_cast<std::size_t>(rotation_clusters));
    parallel::for_each_index(static_cast<std::size_t>(rotation_clusters), [&](std::size_t u) {
      grams[u] = a.gram_of_cluster_sparse(static_cast<index_t>(u));
      diag_blocks[u] = a.diagonal_block_sparse(static_cast<index_t>(u));
    });
    stats.phases.gram_ms += ms_since(t0);

    // Randomized greedy searches, independent per cluster.
    t0 = clock::now();
    std::vector<ClusterRotations> found(static_cast<std::size_t>(rotation_clusters));
    parallel::for_each_index(static_cast<std::size_t>(rotation_clusters), [&](std::size_t u) {
      RotationSearch search;
      search.k = params.k;
      search.eta = params.eta;
      search.elimination_cap = budgets[u];
      search.seed = Rng::derive(params.seed,
                                {0xF0u, static_cast<std::uint64_t>(stage_no), static_cast<std::uint64_t>(u)});
      search.stage = stage_no;
      found[u] = detail::search_rotations(stage.partition->cluster(static_cast<index_t>(u)),
                                          grams[u], diag_blocks[u], search);
    });
    grams.clear();
    diag_blocks.clear();
    for (auto& cr : found)
      for (auto& rot : cr.rotations) stage.rotations.push_back(std::move(rot));
    stats.phases.rotations_ms += ms_since(t0);

    // Apply the whole stage to the blocked matrix.
    t0 = clock::now();
    stage_apply_all_blocks(a, stage);
    stats.phases.apply_ms += ms_since(t0);

    // Residual accounting against the end-of-stage matrix. Eliminations are
    // serialized cluster by cluster; a retired row's mass counts its entries
    // to stage survivors and to indices retired after it, so each discarded
    // entry is charged exactly once and the accumulated residual matches the
    // dense reconstruction error.
    std::vector<index_t> order;
    for (const auto& cr : found)
      for (const auto& e : cr.eliminated) order.push_back(e.global_index);
    for (std::size_t r = 0; r < order.size(); ++r) {
      elim_rank[static_cast<std::size_t>(order[r])] = static_cast<index_t>(r);
      is_active[static_cast<std::size_t>(order[r])] = 0;
    }
    stage.eliminated.resize(order.size());
    parallel::for_each_index(order.size(), [&](std::size_t r) {
      const index_t g = order[r];
      double mass = 0.0;
      double diag = 0.0;
      a.for_each_in_column(g, [&](index_t l, double v) {
        if (l == g) {
          diag = v;
          return;
        }
        const bool later = elim_rank[static_cast<std::size_t>(l)] > static_cast<index_t>(r);
        if (is_active[static_cast<std::size_t>(l)] || later) mass += v * v;
      });
      stage.eliminated[r] = {g, diag, mass};
    });
    for (const auto& e : stage.eliminated) {
      f.residual_sq += 2.0 * e.off_mass_sq;
      retired_diagonal.emplace_back(e.index, e.diagonal);
    }
    for (index_t g : order) elim_rank[static_cast<std::size_t>(g)] = -1;

    // Shrink the active set.
    {
      std::vector<index_t> next;
      next.reserve(active.size() - order.size());
      for (index_t g : active)
        if (is_active[static_cast<std::size_t>(g)]) next.push_back(g);
      active = std::move(next);
    }
    f.active_history.push_back(static_cast<index_t>(active.size()));

    StageInfo info;
    info.stage = stage_no;
    info.clusters = rotation_clusters;
    info.bypassed = static_cast<index_t>(stage.bypassed.size());
    info.rotations = static_cast<index_t>(stage.rotations.size());
    info.eliminated = static_cast<index_t>(stage.eliminated.size());
    info.active_after = static_cast<index_t>(active.size());
    info.cluster_recursion_depth = outcome.max_depth;
    stats.stages.push_back(info);
    f.stages.push_back(std::move(stage));
  }

  // Extract the core-diagonal matrix: the surviving submatrix densifies, all
  // retired indices keep their diagonals.
  if (static_cast<index_t>(active.size()) > params.core_cap)
    throw NumericError("factorize: core of size " + std::to_string(active.size()) +
                       " exceeds the cap of " + std::to_string(params.core_cap) +
                       "; raise core_cap or add stages");
  auto t0 = clock::now();
  BlockedSparseMatrix core_mat = a.reblock(std::make_shared<const Partition>(Partition::single(active)));
  stats.phases.reblocking_ms += ms_since(t0);
  const index_t g = static_cast<index_t>(active.size());
  f.h.core_indices = active;
  f.h.core = DenseMatrix(g, g);
  if (g > 0) {
    const auto& block = core_mat.block(0, 0);
    for (std::size_t jl = 0; jl < block.cols.size(); ++jl)
      for (const auto& [r, value] : block.cols[jl].entries())
        f.h.core(r, static_cast<index_t>(jl)) = value;
  }
  std::sort(retired_diagonal.begin(), retired_diagonal.end());
  f.h.diagonal = std::move(retired_diagonal);

  stats.phases.total_ms = ms_since(run_start);
  if (stats_out) *stats_out = std::move(stats);
  return f;
}

}  // namespace pmmf
