#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedcd/config.hpp"
#include "fedcd/evalkit.hpp"
#include "fedcd/io.hpp"

namespace fedcd {

// Scores one finished run against an optional ground truth.  SEPARATE mode
// reports the per-client mean of each metric.
MetricsRow score_run(const RunReport& report, const BinaryDag* truth,
                     const ExperimentConfig& cfg, std::uint64_t seed, int d);

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  std::vector<SummaryStat> summary;
  std::string results_path;
  std::string summary_path;
};

// Runs cfg.repetitions in-process repetitions, each with seeds derived from
// the master seed, writes results.csv and summary.csv under output_dir, and
// reports each finished row through on_row when given.
ExperimentResult run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const MetricsRow&)>& on_row = {});

}  // namespace fedcd
