#include "fedcd/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fedcd {
namespace {

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lowered(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void bad(const std::string& what) { throw ConfigError(what); }

double num(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    bad("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

long count(const std::string& key, const std::string& value) {
  const double v = num(key, value);
  if (v != std::floor(v)) {
    bad("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
  return static_cast<long>(v);
}

bool flag(const std::string& key, const std::string& value) {
  const std::string v = lowered(value);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  bad("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

void apply_scenario(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  ScenarioSpec& sc = cfg.scenario;
  if (key == "d") {
    sc.d = static_cast<int>(count(key, value));
  } else if (key == "graph") {
    const std::string v = lowered(value);
    if (v == "er") sc.graph = GraphModel::Er;
    else if (v == "sf") sc.graph = GraphModel::Sf;
    else bad("config: graph must be ER or SF, got '" + value + "'");
  } else if (key == "edge_factor") {
    sc.edge_factor = static_cast<int>(count(key, value));
  } else if (key == "clients") {
    sc.m = static_cast<int>(count(key, value));
  } else if (key == "observations") {
    sc.n = static_cast<int>(count(key, value));
  } else if (key == "regime") {
    const std::string v = lowered(value);
    if (v == "iid") sc.regime = Regime::Iid;
    else if (v == "noniid" || v == "non-iid") sc.regime = Regime::NonIid;
    else bad("config: regime must be IID or NONIID, got '" + value + "'");
  } else if (key == "function") {
    const std::string v = lowered(value);
    if (v == "linear") sc.function_family = MechanismKind::Linear;
    else if (v == "gp") sc.function_family = MechanismKind::Gp;
    else if (v == "gp_add") sc.function_family = MechanismKind::GpAdd;
    else if (v == "mlp") sc.function_family = MechanismKind::MlpFn;
    else if (v == "mim") sc.function_family = MechanismKind::Mim;
    else bad("config: function must be LINEAR, GP, GP_ADD, MLP or MIM");
  } else if (key == "noise_var") {
    sc.iid_noise_var = num(key, value);
  } else {
    bad("config: unknown key '" + key + "' in [scenario]");
  }
}

void apply_federation(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value) {
  if (key == "mode") {
    const std::string v = lowered(value);
    if (v == "ds") cfg.fed.mode = Mode::Ds;
    else if (v == "as") cfg.fed.mode = Mode::As;
    else if (v == "separate") cfg.fed.mode = Mode::Separate;
    else if (v == "linear_as") cfg.fed.mode = Mode::LinearAs;
    else bad("config: mode must be DS, AS, SEPARATE or LINEAR_AS");
  } else if (key == "sampled_clients") {
    cfg.fed.r = static_cast<int>(count(key, value));
  } else if (key == "vote_quorum") {
    cfg.fed.vote_quorum = num(key, value);
  } else if (key == "transport") {
    const std::string v = lowered(value);
    if (v == "inproc") cfg.transport = TransportKind::Inproc;
    else if (v == "tcp") cfg.transport = TransportKind::Tcp;
    else bad("config: transport must be inproc or tcp");
  } else if (key == "host") {
    cfg.host = value;
  } else if (key == "port") {
    cfg.port = static_cast<int>(count(key, value));
  } else if (key == "io_timeout") {
    cfg.io_timeout_seconds = num(key, value);
  } else {
    bad("config: unknown key '" + key + "' in [federation]");
  }
}

void apply_solver(ExperimentConfig& cfg, const std::string& key,
                  const std::string& value) {
  SolverConfig& sol = cfg.fed.solver;
  const std::string v = lowered(value);
  if (key == "alpha_init") sol.alpha_init = num(key, value);
  else if (key == "rho_init") {
    if (v == "auto") cfg.rho_auto = true;
    else { sol.rho_init = num(key, value); cfg.rho_auto = false; }
  } else if (key == "beta") {
    if (v == "auto") cfg.beta_auto = true;
    else { sol.beta = num(key, value); cfg.beta_auto = false; }
  } else if (key == "gamma") sol.gamma = num(key, value);
  else if (key == "h_tol") sol.h_tol = num(key, value);
  else if (key == "rho_max") sol.rho_max = num(key, value);
  else if (key == "it_max") sol.it_max = count(key, value);
  else if (key == "it_in") sol.it_in = count(key, value);
  else if (key == "it_fl") sol.it_fl = count(key, value);
  else if (key == "lr") sol.lr = num(key, value);
  else if (key == "lr_decay") {
    if (v == "auto") cfg.lr_decay_auto = true;
    else { sol.lr_decay = num(key, value); cfg.lr_decay_auto = false; }
  } else if (key == "tau") sol.tau = num(key, value);
  else if (key == "lambda") sol.lambda_l1 = num(key, value);
  else if (key == "threshold") {
    sol.threshold = v == "auto" ? 0.0 : num(key, value);
  } else if (key == "reset_adam") sol.reset_adam = flag(key, value);
  else bad("config: unknown key '" + key + "' in [solver]");
}

void apply_experiment(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value) {
  if (key == "repetitions") {
    cfg.repetitions = static_cast<int>(count(key, value));
  } else if (key == "master_seed") {
    try {
      cfg.master_seed = std::stoull(value);
    } catch (const std::exception&) {
      bad("config: key 'master_seed' expects an unsigned integer");
    }
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "scenario_id") {
    cfg.scenario_id = value;
  } else if (key == "data") {
    cfg.data_paths.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string p = trimmed(item);
      if (!p.empty()) cfg.data_paths.push_back(p);
    }
  } else if (key == "truth") {
    cfg.truth_path = value;
  } else if (key == "standardize") {
    const std::string v = lowered(value);
    if (v == "auto") cfg.standardize = StandardizeMode::Auto;
    else cfg.standardize = flag(key, value) ? StandardizeMode::On
                                            : StandardizeMode::Off;
  } else {
    bad("config: unknown key '" + key + "' in [experiment]");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (repetitions < 1) bad("config: repetitions must be >= 1");
  if (!external_data()) scenario.validate();
  if (external_data() && !truth_path.empty() && scenario.d < 1) {
    bad("config: d must be given with an external truth file");
  }
  if (port < 0 || port > 65535) bad("config: port out of range");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trimmed(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') {
        bad("config: malformed section header at line " +
            std::to_string(lineno));
      }
      section = lowered(trimmed(body.substr(1, body.size() - 2)));
      if (section != "scenario" && section != "federation" &&
          section != "solver" && section != "experiment") {
        bad("config: unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      bad("config: expected key = value at line " + std::to_string(lineno));
    }
    const std::string key = lowered(trimmed(body.substr(0, eq)));
    const std::string value = trimmed(body.substr(eq + 1));
    if (key.empty() || value.empty()) {
      bad("config: empty key or value at line " + std::to_string(lineno));
    }
    if (section == "scenario") apply_scenario(cfg, key, value);
    else if (section == "federation") apply_federation(cfg, key, value);
    else if (section == "solver") apply_solver(cfg, key, value);
    else if (section == "experiment") apply_experiment(cfg, key, value);
    else bad("config: key '" + key + "' appears before any section");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buof;
  buof << in.rdbuf();
  return parse_config_text(buof.str());
}

void resolve_solver_defaults(ExperimentConfig& cfg, int d) {
  const bool all_shared =
      cfg.fed.mode == Mode::As || cfg.fed.mode == Mode::LinearAs;
  SolverConfig tuned = cfg.fed.solver;
  tune_penalty_schedule(tuned, d, all_shared);
  if (cfg.rho_auto) cfg.fed.solver.rho_init = tuned.rho_init;
  if (cfg.beta_auto) cfg.fed.solver.beta = tuned.beta;
  // The weighted-adjacency model needs shrinking steps to settle the
  // constraint; the mask parameterization saturates on its own.
  if (cfg.lr_decay_auto) {
    cfg.fed.solver.lr_decay = cfg.fed.mode == Mode::LinearAs ? 0.5 : 1.0;
  }
}

Matrix standardize_columns(const Matrix& x) {
  Matrix out = x;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    out.col(j).array() -= mean;
    if (x.rows() > 1) {
      const double sd =
          std::sqrt(out.col(j).squaredNorm() / (n - 1.0));
      if (sd > 0.0) out.col(j) /= sd;
    }
  }
  return out;
}

}  // namespace fedcd
