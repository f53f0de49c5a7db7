#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "fedcd/experiment.hpp"
#include "fedcd/tcp.hpp"

namespace {

using namespace fedcd;

void print_summary(const ExperimentResult& result) {
  for (const SummaryStat& s : result.summary) {
    std::cout << s.metric << ": " << s.mean << " +/- " << s.stddev << "\n";
  }
  std::cout << "results: " << result.results_path << "\n"
            << "summary: " << result.summary_path << "\n";
}

int cmd_simulate(const std::string& config_path, std::uint64_t* seed_override,
                 std::string* out_override) {
  ExperimentConfig cfg = parse_config_file(config_path);
  if (seed_override != nullptr) cfg.master_seed = *seed_override;
  if (out_override != nullptr) cfg.output_dir = *out_override;
  const ExperimentResult result =
      run_experiment(cfg, [](const MetricsRow& row) {
        std::cout << format_metrics_row(row) << std::endl;
      });
  print_summary(result);
  return 0;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig cfg = parse_config_file(config_path);
  if (cfg.external_data()) {
    throw ConfigError("gen-data needs a synthetic [scenario], not data files");
  }
  ScenarioSpec spec = cfg.scenario;
  spec.seed = derive_seed(derive_seed(cfg.master_seed, 0), 0);
  const Scenario sc = make_scenario(spec);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base(out_dir);
  for (int k = 0; k < spec.m; ++k) {
    const std::string path =
        (base / ("client_" + std::to_string(k) + ".csv")).string();
    save_csv_matrix(path, sc.datasets[static_cast<std::size_t>(k)]);
    std::cout << path << "\n";
  }
  const std::string truth_path = (base / "truth_edges.txt").string();
  save_edge_list(truth_path, sc.truth.b_true);
  std::cout << truth_path << "\n";
  return 0;
}

int cmd_score(const std::string& est_path, const std::string& truth_path,
              int d) {
  const BinaryDag est = load_edge_list(est_path, d);
  const BinaryDag truth = load_edge_list(truth_path, d);
  const MetricsReport m = evaluate_graph(est, truth);
  std::cout << "shd: " << m.shd << "\ntpr: " << m.tpr << "\nfdr: " << m.fdr
            << "\nnnz: " << m.nnz << "\n";
  return 0;
}

int cmd_serve(const std::string& config_path, int* port_override,
              std::string* host_override, const std::string& out_dir) {
  ExperimentConfig cfg = parse_config_file(config_path);
  if (host_override != nullptr) cfg.host = *host_override;
  if (port_override != nullptr) cfg.port = *port_override;
  // [scenario] d and clients size the federation even when the data lives
  // with remote clients.
  const int d = cfg.scenario.d;
  cfg.fed.m = cfg.scenario.m;
  cfg.fed.master_seed = derive_seed(derive_seed(cfg.master_seed, 0), 1);
  resolve_solver_defaults(cfg, d);

  TcpServer server(cfg.fed, d, cfg.host, cfg.port, cfg.io_timeout_seconds);
  std::cout << "listening on " << cfg.host << ":" << server.port()
            << " for " << cfg.fed.m << " clients" << std::endl;
  const RunReport report = server.run();

  std::filesystem::create_directories(out_dir);
  const std::string est_path =
      (std::filesystem::path(out_dir) / "learned_edges.txt").string();
  save_edge_list(est_path, report.learned);
  std::cout << "outer iterations: " << report.outer_iters
            << "\nfinal h: "
            << (report.h_trace.empty() ? 0.0 : report.h_trace.back())
            << "\nlearned edges: " << est_path << "\n";
  return 0;
}

int cmd_join(const std::string& config_path, int client_id,
             const std::string& data_path, int* port_override,
             std::string* host_override) {
  ExperimentConfig cfg = parse_config_file(config_path);
  if (host_override != nullptr) cfg.host = *host_override;
  if (port_override != nullptr) cfg.port = *port_override;
  Matrix data = load_csv_matrix(data_path);
  if (cfg.standardize_effective()) data = standardize_columns(data);
  cfg.fed.m = cfg.scenario.m;
  cfg.fed.master_seed = derive_seed(derive_seed(cfg.master_seed, 0), 1);
  resolve_solver_defaults(cfg, static_cast<int>(data.cols()));
  tcp_join(cfg.fed, client_id, std::move(data), cfg.host, cfg.port,
           cfg.io_timeout_seconds);
  std::cout << "client " << client_id << " finished" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated causal structure learning over distributed data"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", data_path, est_path, truth_path;
  std::string host;
  std::uint64_t seed = 0;
  int port = 0, client_id = 0, d = 0;
  bool have_seed = false, have_port = false, have_host = false,
       have_out = false;

  CLI::App* sim = app.add_subcommand("simulate",
                                     "Run repetitions on the in-process "
                                     "transport and write metric CSVs");
  sim->add_option("--config", config_path, "configuration file")->required();
  sim->add_option("--seed", seed, "override master seed")
      ->each([&](const std::string&) { have_seed = true; });
  sim->add_option("--out", out_dir, "override output directory")
      ->each([&](const std::string&) { have_out = true; });

  CLI::App* gen = app.add_subcommand(
      "gen-data", "Write synthetic per-client CSVs and the true edge list");
  gen->add_option("--config", config_path, "configuration file")->required();
  gen->add_option("--out", out_dir, "output directory");

  CLI::App* score =
      app.add_subcommand("score", "Score an estimated edge list (\"i j\" "
                                  "lines) against a ground-truth edge list");
  score->add_option("--est", est_path, "estimated edge list")->required();
  score->add_option("--truth", truth_path, "true edge list")->required();
  score->add_option("--d", d, "node count")->required();

  CLI::App* serve = app.add_subcommand(
      "serve", "Host the federation server for tcp-mode clients");
  serve->add_option("--config", config_path, "configuration file")->required();
  serve->add_option("--port", port, "override listen port")
      ->each([&](const std::string&) { have_port = true; });
  serve->add_option("--host", host, "override listen address")
      ->each([&](const std::string&) { have_host = true; });
  serve->add_option("--out", out_dir, "output directory");

  CLI::App* join =
      app.add_subcommand("join", "Run one client against a tcp-mode server");
  join->add_option("--config", config_path, "configuration file")->required();
  join->add_option("--client", client_id, "client id")->required();
  join->add_option("--data", data_path, "client observations CSV")->required();
  join->add_option("--port", port, "override server port")
      ->each([&](const std::string&) { have_port = true; });
  join->add_option("--host", host, "override server address")
      ->each([&](const std::string&) { have_host = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(config_path, have_seed ? &seed : nullptr,
                          have_out ? &out_dir : nullptr);
    }
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
    if (score->parsed()) return cmd_score(est_path, truth_path, d);
    if (serve->parsed()) {
      return cmd_serve(config_path, have_port ? &port : nullptr,
                       have_host ? &host : nullptr, out_dir);
    }
    if (join->parsed()) {
      return cmd_join(config_path, client_id, data_path,
                      have_port ? &port : nullptr,
                      have_host ? &host : nullptr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
