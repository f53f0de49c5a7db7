#pragma once

#include <cmath>
#include <vector>

#include "fedcd/graphmask.hpp"
#include "fedcd/mechanisms.hpp"
#include "fedcd/numkit.hpp"

namespace fedcd {

struct AdamConfig {
  double lr = 0.03;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// A flat view of one parameter tensor paired with its ascent gradient.
struct ParamBlock {
  double* value;
  const double* grad;
  Eigen::Index size;
};

// First and second moment accumulators for a fixed list of parameter blocks.
// Moments are lazily shaped on the first step; later steps must present the
// same block layout.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const AdamConfig& cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }
  void reset();
  void set_learning_rate(double lr) { cfg_.lr = lr; }

 private:
  friend void adam_step(AdamState&, const std::vector<ParamBlock>&);
  AdamConfig cfg_;
  std::vector<Eigen::ArrayXd> m_, v_;
  long t_ = 0;
};

// One bias-corrected ascent step over all blocks (shared step counter).
void adam_step(AdamState& state, const std::vector<ParamBlock>& blocks);

// Augmented Lagrangian multiplier state for the outer loop.
struct AlmState {
  double alpha = 0.0;
  double rho = 0.0;
  long t = 1;
};

struct SolverConfig {
  double alpha_init = 0.0;
  double rho_init = 6e-3;
  double beta = 10.0;
  double gamma = 0.25;
  double h_tol = 1e-10;
  double rho_max = 1e14;
  long it_max = 25;
  long it_in = 1000;
  long it_fl = 200;
  double lr = 0.03;
  double lr_decay = 1.0;  // per-outer-iteration factor on lr (1 = constant)
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double tau = 0.2;
  double lambda_l1 = 0.01;
  double threshold = 0.0;  // 0 = auto: 0.5 on masks, 0.3 on |W|
  bool reset_adam = true;  // fresh Adam moments at every subproblem

  AdamConfig adam() const { return {lr, adam_beta1, adam_beta2, adam_eps}; }
  // Learning rate of outer iteration t (1-based): lr * lr_decay^(t-1).
  double lr_at(long outer_t) const {
    return lr * std::pow(lr_decay, static_cast<double>(outer_t - 1));
  }
  void validate() const;
};

// Sets rho_init and beta for dimension d, interpolating linearly in d on
// log10(rho_init) and on beta between the tuned anchor points, clamping
// outside [10, 40].  all_shared selects the anchor set for the mode that
// also shares network weights.
void tune_penalty_schedule(SolverConfig& cfg, int d, bool all_shared);

// Penalized subproblem value: score - alpha*h - rho/2 * h^2.
double subproblem_value(double score, double h, const AlmState& alm);

// Multiplier and penalty update after a subproblem solve.
void alm_update(AlmState& alm, double h_new, double h_old,
                const SolverConfig& cfg);

// True when the outer loop must stop: iteration budget exhausted, constraint
// satisfied, or penalty ceiling exceeded.
bool outer_loop_should_stop(const AlmState& alm, double h,
                            const SolverConfig& cfg);

enum class ModelKind { Mlp, Linear };

// Everything one client owns: its data, its proxy logits (or weighted
// adjacency in the linear model), its networks, its optimizer moments, and
// its private noise stream.
struct ClientState {
  int id = 0;
  ModelKind kind = ModelKind::Mlp;
  Matrix data;
  Matrix u;       // proxy logits; weighted adjacency when kind == Linear
  MlpStack phi;   // empty when kind == Linear
  AdamState adam;
  RngStream stream;
  MlpWorkspace ws;
  ScoreGradients scratch;

  // Parameters optimized locally: u plus (for Mlp) all network tensors.
  std::vector<ParamBlock> param_blocks();
};

// Builds a client for the given data with zero-initialized proxy logits and
// (for the Mlp model) Xavier-initialized networks drawn from the stream.
ClientState make_client(int id, Matrix data, ModelKind kind,
                        const SolverConfig& cfg, RngStream stream);

// Last-step diagnostics from a block of local updates.
struct StepStats {
  double score = 0.0;
  double h = 0.0;
  double penalized = 0.0;
};

// Runs `steps` Adam ascent steps on the penalized local objective.  Each
// step samples a fresh Gumbel-Sigmoid mask from the client's stream (the
// linear model is noise-free).  Throws DivergenceError when parameters or
// gradients go non-finite.
StepStats self_update(ClientState& client, const AlmState& alm,
                      const SolverConfig& cfg, long steps);

}  // namespace fedcd
