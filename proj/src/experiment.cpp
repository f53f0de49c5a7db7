#include "fedcd/experiment.hpp"

#include <filesystem>
#include <limits>

namespace fedcd {

MetricsRow score_run(const RunReport& report, const BinaryDag* truth,
                     const ExperimentConfig& cfg, std::uint64_t seed, int d) {
  MetricsRow row;
  row.scenario_id = cfg.scenario_id;
  row.d = d;
  row.graph =
      cfg.external_data() ? "EXT" : graph_model_name(cfg.scenario.graph);
  row.regime =
      cfg.external_data() ? "EXT" : regime_name(cfg.scenario.regime);
  row.mode = mode_name(cfg.fed.mode);
  row.seed = seed;
  row.outer_iters = report.outer_iters;
  row.wall_seconds = report.wall_seconds;

  const auto count_edges = [](const BinaryDag& b) {
    long e = 0;
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j) e += b(i, j) != 0 ? 1 : 0;
    return e;
  };

  if (truth == nullptr) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.shd = nan;
    row.tpr = nan;
    row.fdr = nan;
    row.nnz = static_cast<double>(count_edges(report.learned));
    return row;
  }

  if (cfg.fed.mode == Mode::Separate) {
    double sum_shd = 0, sum_tpr = 0, sum_fdr = 0, sum_nnz = 0;
    for (const BinaryDag& b : report.per_client) {
      const MetricsReport m = evaluate_graph(b, *truth);
      sum_shd += static_cast<double>(m.shd);
      sum_tpr += m.tpr;
      sum_fdr += m.fdr;
      sum_nnz += static_cast<double>(m.nnz);
    }
    const double inv = 1.0 / static_cast<double>(report.per_client.size());
    row.shd = sum_shd * inv;
    row.tpr = sum_tpr * inv;
    row.fdr = sum_fdr * inv;
    row.nnz = sum_nnz * inv;
  } else {
    const MetricsReport m = evaluate_graph(report.learned, *truth);
    row.shd = static_cast<double>(m.shd);
    row.tpr = m.tpr;
    row.fdr = m.fdr;
    row.nnz = static_cast<double>(m.nnz);
  }
  return row;
}

ExperimentResult run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const MetricsRow&)>& on_row) {
  cfg.validate();
  if (cfg.transport == TransportKind::Tcp) {
    throw ConfigError(
        "run_experiment drives the in-process transport; start the tcp "
        "transport with the serve and join commands");
  }

  std::vector<Matrix> external;
  std::optional<BinaryDag> truth;
  int d = cfg.scenario.d;
  if (cfg.external_data()) {
    for (const std::string& path : cfg.data_paths) {
      external.push_back(load_csv_matrix(path));
      if (external.back().cols() != external.front().cols()) {
        throw ConfigError("config: external datasets disagree on d");
      }
    }
    d = static_cast<int>(external.front().cols());
    if (!cfg.truth_path.empty()) {
      truth = load_edge_list(cfg.truth_path, d);
    }
  }

  ExperimentResult result;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t rep_seed =
        derive_seed(cfg.master_seed, static_cast<std::uint64_t>(rep));

    ExperimentConfig run_cfg = cfg;
    std::vector<Matrix> datasets;
    std::optional<BinaryDag> run_truth = truth;
    if (cfg.external_data()) {
      datasets = external;
    } else {
      ScenarioSpec spec = cfg.scenario;
      spec.seed = derive_seed(rep_seed, 0);
      Scenario sc = make_scenario(spec);
      datasets = std::move(sc.datasets);
      run_truth = sc.truth.b_true;
    }
    if (cfg.standardize_effective()) {
      for (Matrix& x : datasets) x = standardize_columns(x);
    }

    run_cfg.fed.m = static_cast<int>(datasets.size());
    if (run_cfg.fed.r == 0) run_cfg.fed.r = run_cfg.fed.m;
    run_cfg.fed.master_seed = derive_seed(rep_seed, 1);
    resolve_solver_defaults(run_cfg, d);

    const RunReport report = run_dsfcd(datasets, run_cfg.fed);
    MetricsRow row = score_run(
        report, run_truth ? &*run_truth : nullptr, cfg, rep_seed, d);
    if (on_row) on_row(row);
    result.rows.push_back(std::move(row));
  }

  result.summary = summarize_metrics(result.rows);
  std::filesystem::create_directories(cfg.output_dir);
  result.results_path =
      (std::filesystem::path(cfg.output_dir) / "results.csv").string();
  result.summary_path =
      (std::filesystem::path(cfg.output_dir) / "summary.csv").string();
  write_metrics_csv(result.results_path, result.rows);
  write_summary_csv(result.summary_path, result.summary);
  return result;
}

}  // namespace fedcd
