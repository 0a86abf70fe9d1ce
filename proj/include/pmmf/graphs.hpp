// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic graphs for benchmarks and fixtures.

#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "pmmf/rng.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

/// Adjacency of an approximately d-regular graph: degree/2 random
/// permutations contribute one edge per node; self-loops and duplicate edges
/// are discarded, so nnz scales linearly with n.
inline std::vector<Triplet> random_regular_graph(index_t n, index_t degree, std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::pair<index_t, index_t>> edges;
  std::vector<index_t> perm(static_cast<std::size_t>(n));
  for (index_t round = 0; round < degree / 2; ++round) {
    for (index_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (index_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
    }
    for (index_t i = 0; i < n; ++i) {
      const index_t j = perm[static_cast<std::size_t>(i)];
      if (i == j) continue;
      edges.insert({std::min(i, j), std::max(i, j)});
    }
  }
  std::vector<Triplet> out;
  out.reserve(edges.size() * 2);
  for (const auto& [i, j] : edges) {
    out.push_back({i, j, 1.0});
    out.push_back({j, i, 1.0});
  }
  return out;
}

/// Watts-Strogatz small world: a ring with k nearest neighbours per side and
/// seeded rewiring with probability beta.
inline std::vector<Triplet> small_world_graph(index_t n, index_t k, double beta,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::pair<index_t, index_t>> edges;
  auto add = [&](index_t a, index_t b) {
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  };
  for (index_t i = 0; i < n; ++i)
    for (index_t off = 1; off <= k; ++off) add(i, (i + off) % n);
  std::vector<std::pair<index_t, index_t>> ring(edges.begin(), edges.end());
  for (const auto& [a, b] : ring) {
    if (rng.uniform01() >= beta) continue;
    const auto target = static_cast<index_t>(rng.uniform_below(static_cast<std::uint64_t>(n)));
    if (target == a || edges.count({std::min(a, target), std::max(a, target)})) continue;
    edges.erase({a, b});
    add(a, target);
  }
  std::vector<Triplet> out;
  out.reserve(edges.size() * 2);
  for (const auto& [i, j] : edges) {
    out.push_back({i, j, 1.0});
    out.push_back({j, i, 1.0});
  }
  return out;
}

/// Laplacian-ready 2D grid graph adjacency on an s-by-s torus-free grid.
inline std::vector<Triplet> grid_graph(index_t side) {
  std::vector<Triplet> out;
  auto id = [side](index_t r, index_t c) { return r * side + c; };
  for (index_t r = 0; r < side; ++r)
    for (index_t c = 0; c < side; ++c) {
      if (c + 1 < side) {
        out.push_back({id(r, c), id(r, c + 1), 1.0});
        out.push_back({id(r, c + 1), id(r, c), 1.0});
      }
      if (r + 1 < side) {
        out.push_back({id(r, c), id(r + 1, c), 1.0});
        out.push_back({id(r + 1, c), id(r, c), 1.0});
      }
    }
  return out;
}

}  // namespace pmmf
