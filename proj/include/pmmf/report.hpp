// SPDX-License-Identifier: Apache-2.0
//
// Report emission. Every CSV embeds the resolved run configuration as
// '# key=value' comment lines so a report reproduces from its own header;
// numbers are printed with round-trip precision.

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmmf/solver.hpp"
#include "pmmf/types.hpp"

namespace pmmf {

using RunConfig = std::map<std::string, std::string>;

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_config_header(std::ostream& out, const RunConfig& config) {
  for (const auto& [key, value] : config) out << "# " << key << "=" << value << "\n";
}

struct CompressRow {
  std::string dataset;
  index_t n = 0;
  index_t core_dim = 0;
  std::string method;
  double frobenius_error = 0.0;
  double normalized_error = 0.0;
  double wall_time_ms = 0.0;
};

inline void write_compress_csv(std::ostream& out, std::span<const CompressRow> rows,
                               const RunConfig& config) {
  write_config_header(out, config);
  out << "dataset,n,core_dim,method,frobenius_error,normalized_error,wall_time_ms\n";
  for (const CompressRow& r : rows)
    out << r.dataset << "," << r.n << "," << r.core_dim << "," << r.method << ","
        << format_double(r.frobenius_error) << "," << format_double(r.normalized_error) << ","
        << format_double(r.wall_time_ms) << "\n";
}

inline void write_compress_csv(const std::string& path, std::span<const CompressRow> rows,
                               const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_compress_csv(out, rows, config);
}

inline void write_solve_csv(std::ostream& out, const SolveReport& report, const RunConfig& config) {
  write_config_header(out, config);
  out << "iteration,mean_residual,std_residual\n";
  for (std::size_t k = 0; k < report.mean_residual.size(); ++k)
    out << k << "," << format_double(report.mean_residual[k]) << ","
        << format_double(report.std_residual[k]) << "\n";
}

inline void write_solve_csv(const std::string& path, const SolveReport& report,
                            const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_solve_csv(out, report, config);
}

inline nlohmann::json solve_report_to_json(const SolveReport& report, const RunConfig& config,
                                           bool with_timings) {
  nlohmann::json j;
  j["method"] = report.method;
  j["iterations"] = report.mean_iterations;
  j["max_iterations_used"] = report.max_iterations_used;
  j["converged"] = report.all_converged;
  j["breakdown"] = report.any_breakdown;
  j["wall_ms"] = with_timings ? report.wall_ms_total : 0.0;
  j["per_iteration_ms"] = with_timings ? report.per_iteration_ms : 0.0;
  j["final_mean_residual"] =
      report.mean_residual.empty() ? 0.0 : report.mean_residual.back();
  nlohmann::json cfg;
  for (const auto& [key, value] : config) cfg[key] = value;
  j["config"] = std::move(cfg);
  return j;
}

}  // namespace pmmf
