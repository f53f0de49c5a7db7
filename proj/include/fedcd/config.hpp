#pragma once

#include <string>
#include <vector>

#include "fedcd/federation.hpp"
#include "fedcd/synthgen.hpp"

namespace fedcd {

enum class StandardizeMode { Auto, On, Off };
enum class TransportKind { Inproc, Tcp };

// Full description of one experiment: either a synthetic scenario or a set
// of external per-client CSV files, plus the federation setup and the
// repetition protocol.
struct ExperimentConfig {
  ScenarioSpec scenario;
  FederationConfig fed;
  int repetitions = 1;
  std::uint64_t master_seed = 0;
  std::string output_dir = ".";
  std::string scenario_id = "scenario";
  std::vector<std::string> data_paths;
  std::string truth_path;
  StandardizeMode standardize = StandardizeMode::Auto;
  TransportKind transport = TransportKind::Inproc;
  std::string host = "127.0.0.1";
  int port = 7950;
  double io_timeout_seconds = 0.0;  // 0 = wait indefinitely
  bool rho_auto = true;             // rho_init from the tuned schedule
  bool beta_auto = true;
  bool lr_decay_auto = true;        // 0.5 for LINEAR_AS, 1.0 otherwise

  bool external_data() const { return !data_paths.empty(); }
  bool standardize_effective() const {
    if (standardize == StandardizeMode::Auto) return external_data();
    return standardize == StandardizeMode::On;
  }
  void validate() const;
};

// Flat sectioned key = value text:
//   [scenario]   d, graph, edge_factor, clients, observations, regime,
//                function, noise_var
//   [federation] mode, sampled_clients, vote_quorum, transport, host, port,
//                io_timeout
//   [solver]     alpha_init, rho_init, beta, gamma, h_tol, rho_max, it_max,
//                it_in, it_fl, lr, lr_decay, tau, lambda, threshold,
//                reset_adam
//   [experiment] repetitions, master_seed, output_dir, scenario_id, data,
//                truth, standardize
// '#' starts a comment; rho_init, beta, lr_decay and threshold accept
// "auto".
// Unknown sections or keys are errors naming the offender.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Applies the dimension-keyed penalty schedule for fields left on "auto".
void resolve_solver_defaults(ExperimentConfig& cfg, int d);

// Columnwise z-score; columns with zero spread are only centered.
Matrix standardize_columns(const Matrix& x);

}  // namespace fedcd
