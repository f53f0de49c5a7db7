#pragma once

#include <string>
#include <vector>

#include "fedcd/numkit.hpp"

namespace fedcd {

// Headerless comma-separated matrix, one observation per line.
Matrix load_csv_matrix(const std::string& path);
void save_csv_matrix(const std::string& path, const Matrix& x);

// Edge-list text: one "i j" pair per line (edge i -> j).
BinaryDag load_edge_list(const std::string& path, int d);
void save_edge_list(const std::string& path, const BinaryDag& b);

// One result row per (run, seed, mode).
struct MetricsRow {
  std::string scenario_id;
  int d = 0;
  std::string graph;
  std::string regime;
  std::string mode;
  std::uint64_t seed = 0;
  double shd = 0.0;
  double tpr = 0.0;
  double fdr = 0.0;
  double nnz = 0.0;
  long outer_iters = 0;
  double wall_seconds = 0.0;
};

std::string metrics_csv_header();
std::string format_metrics_row(const MetricsRow& row);
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows);

// Mean and sample standard deviation (n - 1 denominator; zero for n = 1)
// of each numeric metric across rows.
struct SummaryStat {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
};

std::vector<SummaryStat> summarize_metrics(const std::vector<MetricsRow>& rows);
void write_summary_csv(const std::string& path,
                       const std::vector<SummaryStat>& stats);

// Fixed-precision decimal formatting used everywhere results are written,
// so identical runs serialize to identical bytes.
std::string format_double(double v);

}  // namespace fedcd
