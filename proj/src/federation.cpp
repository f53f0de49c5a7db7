#include "fedcd/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace fedcd {
namespace {

double resolve_threshold(const SolverConfig& cfg, ModelKind kind) {
  if (cfg.threshold > 0.0) return cfg.threshold;
  return kind == ModelKind::Linear ? 0.3 : 0.5;
}

void log_msg(std::vector<MessageLogEntry>* log, MsgType type, int client,
             bool to_server, long outer_t, long round,
             std::size_t payload_doubles) {
  if (log == nullptr) return;
  log->push_back({type, client, to_server, static_cast<std::uint32_t>(outer_t),
                  static_cast<std::uint32_t>(round), payload_doubles * 8});
}

double mean_client_score(const std::vector<ClientState>& clients,
                         const Matrix& mask_or_absw,
                         const SolverConfig& cfg) {
  double total = 0.0;
  for (const ClientState& c : clients) {
    if (c.kind == ModelKind::Mlp) {
      total += local_score(c.data, c.phi, mask_or_absw, cfg.lambda_l1);
    } else {
      total += linear_score(c.data, c.u, cfg.lambda_l1);
    }
  }
  return total / static_cast<double>(clients.size());
}

// Shared-model training loop (DS, AS, LINEAR_AS) over preconstructed
// clients.  Used by the in-process transport; the TCP server mirrors it.
RunReport run_shared(std::vector<ClientState>& clients,
                     const FederationConfig& cfg, RngStream& select_stream,
                     bool with_log) {
  const SolverConfig& sol = cfg.solver;
  RunReport report;
  std::vector<MessageLogEntry>* log = with_log ? &report.message_log : nullptr;
  const ModelKind kind = clients.front().kind;

  for (const ClientState& c : clients) {
    log_msg(log, MsgType::Hello, c.id, true, 0, 0, 1);
  }

  AlmState alm{sol.alpha_init, sol.rho_init, 1};
  DeterministicEval eval = deterministic_eval(clients.front().u, kind, sol.tau);
  // The stop condition is evaluated after each solved sub-problem, so the
  // first one always runs (the linear model starts at h(0) = 0 exactly).
  double h_prev = eval.h;
  while (true) {
    const double lr_t = sol.lr_at(alm.t);
    for (ClientState& c : clients) {
      if (sol.reset_adam) c.adam.reset();
      c.adam.set_learning_rate(lr_t);
    }
    for (const ClientState& c : clients) {
      log_msg(log, MsgType::Schedule, c.id, false, alm.t, 0, 2);
    }
    run_sps(clients, alm, cfg, select_stream, alm.t, log,
            &report.aggregations);
    eval = deterministic_eval(clients.front().u, kind, sol.tau);
    report.h_trace.push_back(eval.h);
    report.score_trace.push_back(mean_client_score(clients, eval.mask, sol));
    report.alpha_trace.push_back(alm.alpha);
    report.rho_trace.push_back(alm.rho);
    alm_update(alm, eval.h, h_prev, sol);
    h_prev = eval.h;
    if (outer_loop_should_stop(alm, eval.h, sol)) break;
  }
  for (const ClientState& c : clients) {
    log_msg(log, MsgType::Done, c.id, false, alm.t, 0, 0);
  }

  report.outer_iters = alm.t - 1;
  report.final_u = clients.front().u;
  report.final_mask = eval.mask;
  report.learned =
      threshold_to_dag(eval.mask, resolve_threshold(sol, kind));
  return report;
}

}  // namespace

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Ds: return "DS";
    case Mode::As: return "AS";
    case Mode::Separate: return "SEPARATE";
    case Mode::LinearAs: return "LINEAR_AS";
  }
  return "UNKNOWN";
}

void FederationConfig::validate() const {
  if (m < 1) throw ConfigError("federation: m must be at least 1");
  if (r < 1 || r > m) throw ConfigError("federation: r must lie in [1, m]");
  if (!(vote_quorum > 0.0 && vote_quorum <= 1.0)) {
    throw ConfigError("federation: vote quorum must lie in (0, 1]");
  }
  solver.validate();
}

std::vector<int> select_clients(int m, int r, RngStream& stream) {
  if (r < 1 || r > m) {
    throw DimensionError("select_clients: r must lie in [1, m]");
  }
  std::vector<int> pool(m);
  for (int i = 0; i < m; ++i) pool[i] = i;
  for (int i = 0; i < r; ++i) {
    const int j = i + static_cast<int>(stream.below(
                          static_cast<std::uint64_t>(m - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(r);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Matrix aggregate_proxies(const std::vector<const Matrix*>& us) {
  if (us.empty()) {
    throw DimensionError("aggregate_proxies: empty list");
  }
  if (us.size() == 1) return *us.front();
  Matrix sum = *us.front();
  for (std::size_t i = 1; i < us.size(); ++i) {
    if (us[i]->rows() != sum.rows() || us[i]->cols() != sum.cols()) {
      throw DimensionError("aggregate_proxies: shape mismatch");
    }
    sum += *us[i];
  }
  return sum / static_cast<double>(us.size());
}

Matrix aggregate_proxies(const std::vector<Matrix>& us) {
  std::vector<const Matrix*> ptrs;
  ptrs.reserve(us.size());
  for (const Matrix& u : us) ptrs.push_back(&u);
  return aggregate_proxies(ptrs);
}

void broadcast_apply(const Matrix& u_new, std::vector<ClientState>& clients) {
  for (ClientState& c : clients) {
    if (c.u.rows() != u_new.rows() || c.u.cols() != u_new.cols()) {
      throw DimensionError("broadcast_apply: dimension mismatch");
    }
    c.u = u_new;
  }
}

MlpStack average_networks(const std::vector<ClientState>& clients,
                          const std::vector<int>& selected) {
  if (selected.empty()) {
    throw DimensionError("average_networks: empty selection");
  }
  MlpStack mean = clients[selected.front()].phi;
  if (selected.size() == 1) return mean;
  for (std::size_t s = 1; s < selected.size(); ++s) {
    const MlpStack& phi = clients[selected[s]].phi;
    for (std::size_t j = 0; j < mean.size(); ++j) {
      for (std::size_t l = 0; l < mean[j].layers.size(); ++l) {
        mean[j].layers[l].w += phi[j].layers[l].w;
        mean[j].layers[l].b += phi[j].layers[l].b;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(selected.size());
  for (NodeMlp& net : mean) {
    for (DenseLayer& lay : net.layers) {
      lay.w *= inv;
      lay.b *= inv;
    }
  }
  return mean;
}

std::vector<double> flatten_networks(const MlpStack& phi) {
  std::vector<double> flat;
  for (const NodeMlp& net : phi) {
    for (const DenseLayer& lay : net.layers) {
      for (Eigen::Index r = 0; r < lay.w.rows(); ++r)
        for (Eigen::Index c = 0; c < lay.w.cols(); ++c)
          flat.push_back(lay.w(r, c));
      for (Eigen::Index c = 0; c < lay.b.cols(); ++c) flat.push_back(lay.b(c));
    }
  }
  return flat;
}

void unflatten_networks(const std::vector<double>& flat, MlpStack& phi) {
  std::size_t at = 0;
  for (NodeMlp& net : phi) {
    for (DenseLayer& lay : net.layers) {
      const std::size_t need =
          static_cast<std::size_t>(lay.w.size() + lay.b.size());
      if (at + need > flat.size()) {
        throw ProtocolError("unflatten_networks: payload too short");
      }
      for (Eigen::Index r = 0; r < lay.w.rows(); ++r)
        for (Eigen::Index c = 0; c < lay.w.cols(); ++c)
          lay.w(r, c) = flat[at++];
      for (Eigen::Index c = 0; c < lay.b.cols(); ++c) lay.b(c) = flat[at++];
    }
  }
  if (at != flat.size()) {
    throw ProtocolError("unflatten_networks: payload size mismatch");
  }
}

void run_sps(std::vector<ClientState>& clients, const AlmState& alm,
             const FederationConfig& cfg, RngStream& select_stream,
             long outer_t, std::vector<MessageLogEntry>* log,
             long* aggregations) {
  const SolverConfig& sol = cfg.solver;
  const bool aggregate = cfg.mode != Mode::Separate;
  const bool share_phi = cfg.mode == Mode::As;
  const std::size_t u_doubles =
      static_cast<std::size_t>(clients.front().u.size());

  long done = 0;
  long round = 0;
  while (done < sol.it_in) {
    long target = aggregate ? std::min(done + sol.it_fl, sol.it_in)
                            : sol.it_in;
    // Aggregation fires when i % it_fl == 0 or i == it_in, so a final
    // partial window still triggers one event.
    const long block = target - done;
    for (ClientState& c : clients) {
      self_update(c, alm, sol, block);
    }
    done = target;
    if (!aggregate) break;
    ++round;

    const std::size_t phi_doubles =
        share_phi ? flatten_networks(clients.front().phi).size() : 0;
    for (const ClientState& c : clients) {
      log_msg(log, MsgType::UUpload, c.id, true, outer_t, round, u_doubles);
      if (share_phi) {
        log_msg(log, MsgType::PhiUpload, c.id, true, outer_t, round,
                phi_doubles);
      }
    }

    const std::vector<int> sel =
        select_clients(cfg.m, cfg.r, select_stream);
    std::vector<const Matrix*> picked;
    picked.reserve(sel.size());
    for (int idx : sel) picked.push_back(&clients[idx].u);
    const Matrix u_new = aggregate_proxies(picked);
    broadcast_apply(u_new, clients);
    MlpStack phi_new;
    if (share_phi) {
      phi_new = average_networks(clients, sel);
      for (ClientState& c : clients) c.phi = phi_new;
    }
    for (const ClientState& c : clients) {
      log_msg(log, MsgType::UBroadcast, c.id, false, outer_t, round,
              u_doubles);
      if (share_phi) {
        log_msg(log, MsgType::PhiBroadcast, c.id, false, outer_t, round,
                phi_doubles);
      }
    }
    if (aggregations != nullptr) ++*aggregations;
  }
}

DeterministicEval deterministic_eval(const Matrix& u, ModelKind kind,
                                     double tau) {
  DeterministicEval out;
  if (kind == ModelKind::Mlp) {
    out.mask = gumbel_sigmoid(u, tau);
    out.h = acyclicity_value(out.mask);
  } else {
    out.mask = u.cwiseAbs();
    out.mask.diagonal().setZero();
    Matrix wsq = u.array().square().matrix();
    wsq.diagonal().setZero();
    out.h = acyclicity_value(wsq);
  }
  return out;
}

BinaryDag finalize_estimate(const Matrix& u, ModelKind kind,
                            const SolverConfig& cfg) {
  const DeterministicEval eval = deterministic_eval(u, kind, cfg.tau);
  return threshold_to_dag(eval.mask, resolve_threshold(cfg, kind));
}

RunReport run_dsfcd(const std::vector<Matrix>& datasets,
                    const FederationConfig& cfg_in) {
  FederationConfig cfg = cfg_in;
  if (cfg.r == 0) cfg.r = cfg.m;
  cfg.validate();
  if (datasets.size() != static_cast<std::size_t>(cfg.m)) {
    throw ConfigError("run: dataset count must equal client count m");
  }
  const Eigen::Index d = datasets.front().cols();
  for (const Matrix& x : datasets) {
    if (x.cols() != d) {
      throw DimensionError("run: datasets must share column count");
    }
    if (x.rows() < 1) throw DimensionError("run: empty dataset");
  }

  const auto started = std::chrono::steady_clock::now();
  const RngStream master(cfg.master_seed);
  const ModelKind kind = cfg.model_kind();
  RunReport report;

  if (cfg.mode == Mode::Separate) {
    FederationConfig solo = cfg;
    solo.m = 1;
    solo.r = 1;
    solo.mode = Mode::Ds;
    report.per_client.reserve(datasets.size());
    for (int k = 0; k < cfg.m; ++k) {
      std::vector<ClientState> one;
      one.push_back(
          make_client(k, datasets[k], kind, cfg.solver,
                      master.split(static_cast<std::uint64_t>(k))));
      RngStream sel = master.split(static_cast<std::uint64_t>(cfg.m));
      RunReport sub = run_shared(one, solo, sel, false);
      report.per_client.push_back(sub.learned);
      if (k == 0) {
        report.h_trace = sub.h_trace;
        report.score_trace = sub.score_trace;
        report.alpha_trace = sub.alpha_trace;
        report.rho_trace = sub.rho_trace;
        report.final_u = sub.final_u;
        report.final_mask = sub.final_mask;
      }
      report.outer_iters = std::max(report.outer_iters, sub.outer_iters);
    }
    report.learned = vote_combine(report.per_client, cfg.vote_quorum);
  } else {
    std::vector<ClientState> clients;
    clients.reserve(datasets.size());
    for (int k = 0; k < cfg.m; ++k) {
      clients.push_back(
          make_client(k, datasets[k], kind, cfg.solver,
                      master.split(static_cast<std::uint64_t>(k))));
    }
    RngStream sel = master.split(static_cast<std::uint64_t>(cfg.m));
    report = run_shared(clients, cfg, sel, true);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

BinaryDag vote_combine(const std::vector<BinaryDag>& bs, double quorum) {
  if (bs.empty()) throw DimensionError("vote_combine: empty list");
  if (!(quorum > 0.0 && quorum <= 1.0)) {
    throw DimensionError("vote_combine: quorum must lie in (0, 1]");
  }
  const Eigen::Index d = bs.front().rows();
  Matrix support = Matrix::Zero(d, d);
  for (const BinaryDag& b : bs) {
    if (b.rows() != d || b.cols() != d) {
      throw DimensionError("vote_combine: shape mismatch");
    }
    support += b.cast<double>();
  }
  const double cut = quorum * static_cast<double>(bs.size());
  BinaryDag combined = BinaryDag::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j && support(i, j) > cut) combined(i, j) = 1;
  return prune_cycles(std::move(combined), support);
}

}  // namespace fedcd
