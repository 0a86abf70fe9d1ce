// SPDX-License-Identifier: Apache-2.0
//
// Versioned JSON container for a factorization: parameters, per-stage
// partitions, rotations, eliminations and the core-diagonal matrix. Enough
// to reload and apply the operator without the original matrix.

#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pmmf/factorizer.hpp"
#include "pmmf/partition.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

inline constexpr const char* kFactorizationFormat = "pmmf-factorization";
inline constexpr int kFactorizationVersion = 1;

inline nlohmann::json to_json(const FactorizeParams& p) {
  return {
      {"k", p.k},
      {"n_stages", p.n_stages},
      {"eta", p.eta},
      {"core_min", p.core_min},
      {"core_cap", p.core_cap},
      {"seed", p.seed},
      {"cluster",
       {{"m_target", p.cluster.m_target},
        {"c_min", p.cluster.c_min},
        {"c_max", p.cluster.c_max},
        {"d_max", p.cluster.d_max},
        {"bypass", p.cluster.bypass_enabled},
        {"seed", p.cluster.seed}}},
  };
}

inline FactorizeParams factorize_params_from_json(const nlohmann::json& j) {
  FactorizeParams p;
  p.k = j.at("k").get<int>();
  p.n_stages = j.at("n_stages").get<int>();
  p.eta = j.at("eta").get<double>();
  p.core_min = j.at("core_min").get<index_t>();
  p.core_cap = j.at("core_cap").get<index_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  const auto& c = j.at("cluster");
  p.cluster.m_target = c.at("m_target").get<index_t>();
  p.cluster.c_min = c.at("c_min").get<index_t>();
  p.cluster.c_max = c.at("c_max").get<index_t>();
  p.cluster.d_max = c.at("d_max").get<int>();
  p.cluster.bypass_enabled = c.at("bypass").get<bool>();
  p.cluster.seed = c.at("seed").get<std::uint64_t>();
  return p;
}

inline nlohmann::json factorization_to_json(const MmfFactorization& f) {
  nlohmann::json j;
  j["format"] = kFactorizationFormat;
  j["version"] = kFactorizationVersion;
  j["n"] = f.n;
  j["residual_sq"] = f.residual_sq;
  j["active_history"] = f.active_history;
  j["params"] = to_json(f.params);
  nlohmann::json stages = nlohmann::json::array();
  for (const Stage& stage : f.stages) {
    nlohmann::json js;
    nlohmann::json clusters = nlohmann::json::array();
    for (index_t u = 0; u < stage.partition->num_clusters(); ++u) {
      auto c = stage.partition->cluster(u);
      clusters.push_back(std::vector<index_t>(c.begin(), c.end()));
    }
    js["partition"] = std::move(clusters);
    js["bypassed"] = stage.bypassed;
    nlohmann::json rotations = nlohmann::json::array();
    for (const Rotation& rot : stage.rotations) {
      nlohmann::json jr;
      jr["i"] = rot.indices;
      std::vector<double> q;
      q.reserve(static_cast<std::size_t>(rot.order() * rot.order()));
      for (index_t a = 0; a < rot.order(); ++a)
        for (index_t b = 0; b < rot.order(); ++b) q.push_back(rot.matrix(a, b));
      jr["q"] = std::move(q);
      rotations.push_back(std::move(jr));
    }
    js["rotations"] = std::move(rotations);
    nlohmann::json elims = nlohmann::json::array();
    for (const Elimination& e : stage.eliminated)
      elims.push_back({{"i", e.index}, {"d", e.diagonal}, {"m", e.off_mass_sq}});
    js["eliminated"] = std::move(elims);
    stages.push_back(std::move(js));
  }
  j["stages"] = std::move(stages);
  j["core"]["indices"] = f.h.core_indices;
  {
    std::vector<double> cv;
    const index_t g = f.h.core.rows();
    cv.reserve(static_cast<std::size_t>(g * g));
    for (index_t a = 0; a < g; ++a)
      for (index_t b = 0; b < g; ++b) cv.push_back(f.h.core(a, b));
    j["core"]["dense"] = std::move(cv);
  }
  {
    nlohmann::json diag = nlohmann::json::array();
    for (const auto& [i, d] : f.h.diagonal) diag.push_back({{"i", i}, {"d", d}});
    j["diagonal"] = std::move(diag);
  }
  return j;
}

inline MmfFactorization factorization_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kFactorizationFormat)
    throw DataError("factorization file: unknown format");
  if (j.value("version", -1) != kFactorizationVersion)
    throw DataError("factorization file: unsupported version");
  MmfFactorization f;
  f.n = j.at("n").get<index_t>();
  f.residual_sq = j.at("residual_sq").get<double>();
  f.active_history = j.at("active_history").get<std::vector<index_t>>();
  f.params = factorize_params_from_json(j.at("params"));
  for (const auto& js : j.at("stages")) {
    Stage stage;
    std::vector<std::vector<index_t>> clusters;
    for (const auto& jc : js.at("partition")) clusters.push_back(jc.get<std::vector<index_t>>());
    stage.partition = std::make_shared<const Partition>(std::move(clusters));
    stage.bypassed = js.at("bypassed").get<std::vector<index_t>>();
    for (const auto& jr : js.at("rotations")) {
      Rotation rot;
      rot.indices = jr.at("i").get<std::vector<index_t>>();
      const auto q = jr.at("q").get<std::vector<double>>();
      const auto k = static_cast<index_t>(rot.indices.size());
      if (q.size() != static_cast<std::size_t>(k * k))
        throw DataError("factorization file: rotation matrix size mismatch");
      rot.matrix = DenseMatrix(k, k);
      for (index_t a = 0; a < k; ++a)
        for (index_t b = 0; b < k; ++b)
          rot.matrix(a, b) = q[static_cast<std::size_t>(a * k + b)];
      rot.stage = static_cast<int>(f.stages.size()) + 1;
      stage.rotations.push_back(std::move(rot));
    }
    for (const auto& je : js.at("eliminated"))
      stage.eliminated.push_back(
          {je.at("i").get<index_t>(), je.at("d").get<double>(), je.at("m").get<double>()});
    f.stages.push_back(std::move(stage));
  }
  f.h.core_indices = j.at("core").at("indices").get<std::vector<index_t>>();
  {
    const auto cv = j.at("core").at("dense").get<std::vector<double>>();
    const auto g = static_cast<index_t>(f.h.core_indices.size());
    if (cv.size() != static_cast<std::size_t>(g * g))
      throw DataError("factorization file: core size mismatch");
    f.h.core = DenseMatrix(g, g);
    for (index_t a = 0; a < g; ++a)
      for (index_t b = 0; b < g; ++b) f.h.core(a, b) = cv[static_cast<std::size_t>(a * g + b)];
  }
  for (const auto& jd : j.at("diagonal"))
    f.h.diagonal.emplace_back(jd.at("i").get<index_t>(), jd.at("d").get<double>());
  return f;
}

inline void save_factorization(const MmfFactorization& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << factorization_to_json(f).dump(1) << "\n";
}

inline MmfFactorization load_factorization(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("factorization file: ") + e.what());
  }
  return factorization_from_json(j);
}

}  // namespace pmmf
