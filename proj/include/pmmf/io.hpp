// SPDX-License-Identifier: Apache-2.0
//
// Data ingestion: Matrix Market coordinate files, SNAP-style edge lists,
// graph Laplacian construction and symmetrization.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pmmf/types.hpp"

namespace pmmf {

struct TripletMatrix {
  index_t rows = 0;
  index_t cols = 0;
  std::vector<Triplet> entries;

  index_t square_dim() const { return std::max(rows, cols); }
};

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline double parse_value(const std::string& token, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw DataError(std::string(what) + ": bad number '" + token + "'");
    return v;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    throw DataError(std::string(what) + ": bad number '" + token + "'");
  }
}

inline index_t parse_index(const std::string& token, const char* what) {
  index_t v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size())
    throw DataError(std::string(what) + ": bad integer '" + token + "'");
  return v;
}

}  // namespace detail

/// Reads a Matrix Market coordinate file (real/integer/pattern,
/// general/symmetric). Symmetric files mirror every off-diagonal entry,
/// pattern entries get value 1, indices convert from 1- to 0-based.
inline TripletMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("matrix market: empty file");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || detail::lower(object) != "matrix")
    throw DataError("matrix market: malformed header");
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (format != "coordinate") throw DataError("matrix market: only coordinate format supported");
  if (field != "real" && field != "integer" && field != "pattern")
    throw DataError("matrix market: unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw DataError("matrix market: unsupported symmetry '" + symmetry + "'");
  const bool pattern = field == "pattern";
  const bool mirror = symmetry == "symmetric";

  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  index_t rows = 0, cols = 0;
  std::int64_t nnz = 0;
  if (!(dims >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
    throw DataError("matrix market: malformed size line");

  TripletMatrix out;
  out.rows = rows;
  out.cols = cols;
  out.entries.reserve(static_cast<std::size_t>(pattern ? nnz : nnz) * (mirror ? 2 : 1));
  std::int64_t seen = 0;
  std::string si, sj, sv;
  while (seen < nnz) {
    if (!std::getline(in, line)) throw DataError("matrix market: unexpected end of file");
    if (line.empty() || line[0] == '%') continue;
    std::istringstream row(line);
    if (!(row >> si >> sj)) throw DataError("matrix market: malformed entry line");
    const index_t i = detail::parse_index(si, "matrix market") - 1;
    const index_t j = detail::parse_index(sj, "matrix market") - 1;
    double v = 1.0;
    if (!pattern) {
      if (!(row >> sv)) throw DataError("matrix market: missing value");
      v = detail::parse_value(sv, "matrix market");
    }
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw DataError("matrix market: index out of range");
    if (!std::isfinite(v)) throw DataError("matrix market: non-finite value");
    out.entries.push_back({i, j, v});
    if (mirror && i != j) out.entries.push_back({j, i, v});
    ++seen;
  }
  return out;
}

inline TripletMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_matrix_market(in);
}

/// Writes general real coordinate format with round-trip exact values.
inline void write_matrix_market(std::ostream& out, index_t rows, index_t cols,
                                std::span<const Triplet> entries) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << rows << " " << cols << " " << entries.size() << "\n";
  char buf[64];
  for (const Triplet& t : entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", t.value);
    out << (t.row + 1) << " " << (t.col + 1) << " " << buf << "\n";
  }
}

inline void write_matrix_market(const std::string& path, index_t rows, index_t cols,
                                std::span<const Triplet> entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_matrix_market(out, rows, cols, entries);
}

struct EdgeList {
  index_t n = 0;                       // compacted node count
  std::vector<Triplet> entries;        // symmetric adjacency triplets
  std::vector<index_t> original_ids;   // original_ids[new] = id in the file
};

/// Reads whitespace-separated "u v [w]" lines; '#' starts a comment.
/// Unweighted edges get weight 1, self-loops are kept, node ids compact to
/// 0..n-1 ordered by original id.
inline EdgeList read_edge_list(std::istream& in) {
  std::string line;
  std::vector<std::pair<std::pair<index_t, index_t>, double>> raw;
  bool any_line = false;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream row(line);
    std::string su, sv, sw;
    if (!(row >> su)) continue;
    if (!(row >> sv)) throw DataError("edge list: line with a single token");
    any_line = true;
    const index_t u = detail::parse_index(su, "edge list");
    const index_t v = detail::parse_index(sv, "edge list");
    double w = 1.0;
    if (row >> sw) w = detail::parse_value(sw, "edge list");
    if (!std::isfinite(w)) throw DataError("edge list: non-finite weight");
    raw.push_back({{u, v}, w});
  }
  if (!any_line) throw DataError("edge list: no edges found");

  std::vector<index_t> ids;
  ids.reserve(raw.size() * 2);
  for (const auto& [edge, w] : raw) {
    ids.push_back(edge.first);
    ids.push_back(edge.second);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::map<index_t, index_t> to_new;
  for (std::size_t k = 0; k < ids.size(); ++k) to_new[ids[k]] = static_cast<index_t>(k);

  EdgeList out;
  out.n = static_cast<index_t>(ids.size());
  out.original_ids = std::move(ids);
  out.entries.reserve(raw.size() * 2);
  for (const auto& [edge, w] : raw) {
    const index_t u = to_new[edge.first];
    const index_t v = to_new[edge.second];
    out.entries.push_back({u, v, w});
    if (u != v) out.entries.push_back({v, u, w});
  }
  return out;
}

inline EdgeList read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_edge_list(in);
}

/// Graph Laplacian L = D - W of symmetric adjacency triplets, with an
/// optional +shift*I to make solver inputs strictly positive definite.
/// Weights must be non-negative.
inline std::vector<Triplet> laplacian(std::span<const Triplet> adjacency, index_t n,
                                      double shift = 0.0) {
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (const Triplet& t : adjacency) {
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
      throw DataError("laplacian: index out of range");
    if (t.value < 0.0) throw DataError("laplacian: negative weight");
    degree[static_cast<std::size_t>(t.row)] += t.value;
  }
  std::vector<Triplet> out;
  out.reserve(adjacency.size() + static_cast<std::size_t>(n));
  for (const Triplet& t : adjacency) out.push_back({t.row, t.col, -t.value});
  for (index_t i = 0; i < n; ++i)
    out.push_back({i, i, degree[static_cast<std::size_t>(i)] + shift});
  return out;
}

/// A + A^T with each unordered pair summed once in a canonical order, so the
/// result is exactly symmetric entry by entry.
inline std::vector<Triplet> symmetrize(std::span<const Triplet> entries) {
  std::map<std::pair<index_t, index_t>, double> upper;
  for (const Triplet& t : entries) {
    const index_t i = std::min(t.row, t.col);
    const index_t j = std::max(t.row, t.col);
    upper[{i, j}] += t.value;
  }
  std::vector<Triplet> out;
  out.reserve(upper.size() * 2);
  for (const auto& [key, sum] : upper) {
    const auto [i, j] = key;
    if (i == j) {
      out.push_back({i, i, 2.0 * sum});  // diagonal of A + A^T doubles
    } else {
      out.push_back({i, j, sum});
      out.push_back({j, i, sum});
    }
  }
  return out;
}

}  // namespace pmmf
