#include "fedcd/localsolver.hpp"

#include <cmath>
#include <utility>

namespace fedcd {
namespace {

double interp(double d, double d0, double v0, double d1, double v1) {
  return v0 + (v1 - v0) * (d - d0) / (d1 - d0);
}

bool all_finite(const std::vector<ParamBlock>& blocks, bool values) {
  for (const ParamBlock& blk : blocks) {
    const double* p = values ? blk.value : blk.grad;
    for (Eigen::Index i = 0; i < blk.size; ++i) {
      if (!std::isfinite(p[i])) return false;
    }
  }
  return true;
}

}  // namespace

void AdamState::reset() {
  m_.clear();
  v_.clear();
  t_ = 0;
}

void adam_step(AdamState& state, const std::vector<ParamBlock>& blocks) {
  if (state.m_.empty()) {
    state.m_.resize(blocks.size());
    state.v_.resize(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      state.m_[i] = Eigen::ArrayXd::Zero(blocks[i].size);
      state.v_[i] = Eigen::ArrayXd::Zero(blocks[i].size);
    }
  }
  if (state.m_.size() != blocks.size()) {
    throw DimensionError("adam_step: block count changed between steps");
  }
  const AdamConfig& cfg = state.cfg_;
  state.t_ += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t_));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (state.m_[i].size() != blocks[i].size) {
      throw DimensionError("adam_step: block shape changed between steps");
    }
    Eigen::Map<const Eigen::ArrayXd> g(blocks[i].grad, blocks[i].size);
    Eigen::Map<Eigen::ArrayXd> x(blocks[i].value, blocks[i].size);
    Eigen::ArrayXd& m = state.m_[i];
    Eigen::ArrayXd& v = state.v_[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    x += cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
  }
}

void SolverConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("solver: gamma must lie in (0, 1)");
  }
  if (!(beta > 1.0)) throw ConfigError("solver: beta must exceed 1");
  if (it_fl > it_in) throw ConfigError("solver: it_fl must not exceed it_in");
  if (it_fl <= 0 || it_in <= 0 || it_max <= 0) {
    throw ConfigError("solver: iteration counts must be positive");
  }
  if (!(tau > 0.0)) throw ConfigError("solver: tau must be positive");
  if (!(rho_init > 0.0)) throw ConfigError("solver: rho_init must be positive");
  if (!(lr > 0.0)) throw ConfigError("solver: lr must be positive");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) {
    throw ConfigError("solver: lr_decay must lie in (0, 1]");
  }
}

void tune_penalty_schedule(SolverConfig& cfg, int d, bool all_shared) {
  const double mid_log_rho = all_shared ? -5.0 : std::log10(6e-5);
  const double dd = static_cast<double>(d);
  double log_rho, beta;
  if (d <= 10) {
    log_rho = std::log10(6e-3);
    beta = 10.0;
  } else if (d <= 20) {
    log_rho = interp(dd, 10, std::log10(6e-3), 20, mid_log_rho);
    beta = interp(dd, 10, 10.0, 20, 20.0);
  } else if (d <= 40) {
    log_rho = interp(dd, 20, mid_log_rho, 40, -11.0);
    beta = interp(dd, 20, 20.0, 40, 120.0);
  } else {
    log_rho = -11.0;
    beta = 120.0;
  }
  cfg.rho_init = std::pow(10.0, log_rho);
  cfg.beta = beta;
}

double subproblem_value(double score, double h, const AlmState& alm) {
  return score - alm.alpha * h - 0.5 * alm.rho * h * h;
}

void alm_update(AlmState& alm, double h_new, double h_old,
                const SolverConfig& cfg) {
  alm.alpha += alm.rho * h_new;
  if (h_new > cfg.gamma * h_old) alm.rho *= cfg.beta;
  alm.t += 1;
}

bool outer_loop_should_stop(const AlmState& alm, double h,
                            const SolverConfig& cfg) {
  return alm.t > cfg.it_max || h < cfg.h_tol || alm.rho > cfg.rho_max;
}

std::vector<ParamBlock> ClientState::param_blocks() {
  std::vector<ParamBlock> blocks;
  blocks.reserve(1 + phi.size() * kMlpLayers * 2);
  blocks.push_back({u.data(), scratch.grad_u.data(), u.size()});
  for (std::size_t j = 0; j < phi.size(); ++j) {
    for (std::size_t l = 0; l < phi[j].layers.size(); ++l) {
      DenseLayer& lay = phi[j].layers[l];
      DenseLayer& g = scratch.grad_phi[j].layers[l];
      blocks.push_back({lay.w.data(), g.w.data(), lay.w.size()});
      blocks.push_back({lay.b.data(), g.b.data(), lay.b.size()});
    }
  }
  return blocks;
}

ClientState make_client(int id, Matrix data, ModelKind kind,
                        const SolverConfig& cfg, RngStream stream) {
  const Eigen::Index d = data.cols();
  ClientState c;
  c.id = id;
  c.kind = kind;
  c.data = std::move(data);
  c.u = Matrix::Zero(d, d);
  c.stream = stream;
  c.adam = AdamState(cfg.adam());
  c.scratch.grad_u = Matrix::Zero(d, d);
  if (kind == ModelKind::Mlp) {
    c.phi = mlp_init(static_cast<int>(d), c.stream);
    c.scratch.grad_phi = c.phi;  // shape template; overwritten every step
  }
  return c;
}

StepStats self_update(ClientState& client, const AlmState& alm,
                      const SolverConfig& cfg, long steps) {
  StepStats stats;
  std::vector<ParamBlock> blocks = client.param_blocks();
  for (long s = 0; s < steps; ++s) {
    double score, h;
    if (client.kind == ModelKind::Mlp) {
      const Matrix mask = gumbel_sigmoid(client.u, cfg.tau, client.stream);
      local_score_gradients_into(client.data, client.phi, mask, cfg.tau,
                                 cfg.lambda_l1, client.scratch, client.ws);
      const AcyclicityEval acyc = acyclicity_value_and_gradient(cfg.tau, mask);
      score = client.scratch.score;
      h = acyc.value;
      client.scratch.grad_u.noalias() -=
          (alm.alpha + alm.rho * h) * acyc.gradient;
    } else {
      const LinearScoreGradients lin =
          linear_score_gradients(client.data, client.u, cfg.lambda_l1);
      Matrix wsq = client.u.array().square().matrix();
      wsq.diagonal().setZero();
      const Matrix ew = matexp(wsq);
      h = ew.trace() - static_cast<double>(wsq.rows());
      score = lin.score;
      client.scratch.score = score;
      client.scratch.grad_u = lin.grad_w;
      client.scratch.grad_u.array() -=
          (alm.alpha + alm.rho * h) *
          (ew.transpose().array() * 2.0 * client.u.array());
      client.scratch.grad_u.diagonal().setZero();
    }
    if (!all_finite(blocks, false)) {
      throw DivergenceError("self_update: non-finite gradient at step " +
                                std::to_string(s + 1) + " on client " +
                                std::to_string(client.id),
                            client.id, s + 1);
    }
    adam_step(client.adam, blocks);
    if (!all_finite(blocks, true)) {
      throw DivergenceError("self_update: non-finite parameter at step " +
                                std::to_string(s + 1) + " on client " +
                                std::to_string(client.id),
                            client.id, s + 1);
    }
    stats.score = score;
    stats.h = h;
    stats.penalized = subproblem_value(score, h, alm);
  }
  return stats;
}

}  // namespace fedcd
