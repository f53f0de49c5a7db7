#pragma once

#include <vector>

#include "fedcd/localsolver.hpp"
#include "fedcd/wire.hpp"

namespace fedcd {

enum class Mode { Ds, As, Separate, LinearAs };

const char* mode_name(Mode m);

struct FederationConfig {
  int m = 10;
  int r = 0;  // clients sampled per aggregation; 0 = all m
  Mode mode = Mode::Ds;
  SolverConfig solver;
  std::uint64_t master_seed = 0;
  double vote_quorum = 0.5;  // combiner for per-client estimates

  ModelKind model_kind() const {
    return mode == Mode::LinearAs ? ModelKind::Linear : ModelKind::Mlp;
  }
  void validate() const;
};

struct RunReport {
  BinaryDag learned;
  std::vector<BinaryDag> per_client;  // one per client in SEPARATE mode
  Matrix final_u;
  Matrix final_mask;
  std::vector<double> h_trace;
  std::vector<double> score_trace;
  std::vector<double> alpha_trace;
  std::vector<double> rho_trace;
  long outer_iters = 0;
  long aggregations = 0;
  double wall_seconds = 0.0;
  std::vector<MessageLogEntry> message_log;
};

// Uniformly random r-subset of [0, m) without replacement, returned in
// ascending order (aggregation iterates it deterministically).
std::vector<int> select_clients(int m, int r, RngStream& stream);

// Entrywise arithmetic mean.  A singleton list returns its element bitwise.
Matrix aggregate_proxies(const std::vector<const Matrix*>& us);
Matrix aggregate_proxies(const std::vector<Matrix>& us);

// Installs u_new as every client's proxy matrix.
void broadcast_apply(const Matrix& u_new, std::vector<ClientState>& clients);

// Layerwise arithmetic mean of the selected clients' networks.
MlpStack average_networks(const std::vector<ClientState>& clients,
                          const std::vector<int>& selected);

// Flat row-major packing of a network stack for transmission (node order,
// layer order, weights then bias per layer).
std::vector<double> flatten_networks(const MlpStack& phi);
void unflatten_networks(const std::vector<double>& flat, MlpStack& phi);

// One sub-problem: it_in local steps per client with an aggregation barrier
// every it_fl steps (and at the end).  In SEPARATE mode the barriers do
// nothing.  Appends one audit entry per logical message when log != nullptr.
void run_sps(std::vector<ClientState>& clients, const AlmState& alm,
             const FederationConfig& cfg, RngStream& select_stream,
             long outer_t, std::vector<MessageLogEntry>* log,
             long* aggregations);

// Full training run on the in-process transport.
RunReport run_dsfcd(const std::vector<Matrix>& datasets,
                    const FederationConfig& cfg);

// Majority vote: edge kept iff strictly more than quorum * list-size clients
// report it, then minimum-support cycle edges are removed until acyclic.
BinaryDag vote_combine(const std::vector<BinaryDag>& bs, double quorum);

// Deterministic evaluation artifacts shared by transports: the zero-noise
// mask (or |W| in the linear model) and its acyclicity value.
struct DeterministicEval {
  Matrix mask;
  double h = 0.0;
};
DeterministicEval deterministic_eval(const Matrix& u, ModelKind kind,
                                     double tau);

// Final hard estimate from the deterministic mask.
BinaryDag finalize_estimate(const Matrix& u, ModelKind kind,
                            const SolverConfig& cfg);

}  // namespace fedcd
