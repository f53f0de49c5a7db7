#include "fedcd/mechanisms.hpp"

#include <cmath>

namespace fedcd {
namespace {

void check_shapes(const Matrix& x, const MlpStack& phi, const Matrix& mask,
                  const char* who) {
  const Eigen::Index d = x.cols();
  if (mask.rows() != d || mask.cols() != d) {
    throw DimensionError(std::string(who) + ": mask must be d x d");
  }
  if (static_cast<Eigen::Index>(phi.size()) != d) {
    throw DimensionError(std::string(who) + ": one network per node required");
  }
  for (const NodeMlp& net : phi) {
    if (net.layers.size() != kMlpLayers) {
      throw DimensionError(std::string(who) + ": networks must have 4 layers");
    }
    if (net.layers[0].w.rows() != d) {
      throw DimensionError(std::string(who) +
                           ": first layer input width must equal d");
    }
  }
}

MlpStack allocate_like(const MlpStack& phi) {
  MlpStack g(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) {
    g[j].layers.resize(phi[j].layers.size());
    for (std::size_t l = 0; l < phi[j].layers.size(); ++l) {
      g[j].layers[l].w.resize(phi[j].layers[l].w.rows(),
                              phi[j].layers[l].w.cols());
      g[j].layers[l].b.resize(phi[j].layers[l].b.cols());
    }
  }
  return g;
}

}  // namespace

MlpStack mlp_init(int d, RngStream& stream, int hidden) {
  if (d <= 0 || hidden <= 0) {
    throw DimensionError("mlp_init: d and hidden must be positive");
  }
  const int widths[kMlpLayers + 1] = {d, hidden, hidden, hidden, 1};
  MlpStack phi(d);
  for (int j = 0; j < d; ++j) {
    phi[j].layers.resize(kMlpLayers);
    for (int l = 0; l < kMlpLayers; ++l) {
      const int fan_in = widths[l];
      const int fan_out = widths[l + 1];
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      Matrix& w = phi[j].layers[l].w;
      w.resize(fan_in, fan_out);
      for (int r = 0; r < fan_in; ++r)
        for (int c = 0; c < fan_out; ++c)
          w(r, c) = (2.0 * stream.uniform01() - 1.0) * bound;
      phi[j].layers[l].b = RowVector::Zero(fan_out);
    }
  }
  return phi;
}

Matrix masked_forward(const MlpStack& phi, const Matrix& mask,
                      const Matrix& x) {
  check_shapes(x, phi, mask, "masked_forward");
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix yhat(n, d);
  Matrix p, a;
  for (Eigen::Index j = 0; j < d; ++j) {
    const NodeMlp& net = phi[j];
    p.noalias() = mask.col(j).asDiagonal() * net.layers[0].w;
    a.noalias() = x * p;
    a = (a.rowwise() + net.layers[0].b).array().tanh();
    for (int l = 1; l < kMlpLayers - 1; ++l) {
      Matrix z = a * net.layers[l].w;
      a = (z.rowwise() + net.layers[l].b).array().tanh();
    }
    yhat.col(j).noalias() = a * net.layers[kMlpLayers - 1].w;
    yhat.col(j).array() += net.layers[kMlpLayers - 1].b(0);
  }
  return yhat;
}

double local_score(const Matrix& x, const MlpStack& phi, const Matrix& mask,
                   double lambda) {
  const Matrix yhat = masked_forward(phi, mask, x);
  const double n = static_cast<double>(x.rows());
  return -(x - yhat).squaredNorm() / (2.0 * n) - lambda * mask.sum();
}

ScoreGradients local_score_gradients(const Matrix& x, const MlpStack& phi,
                                     const Matrix& mask, double tau,
                                     double lambda) {
  ScoreGradients out;
  MlpWorkspace ws;
  local_score_gradients_into(x, phi, mask, tau, lambda, out, ws);
  return out;
}

void local_score_gradients_into(const Matrix& x, const MlpStack& phi,
                                const Matrix& mask, double tau, double lambda,
                                ScoreGradients& out, MlpWorkspace& ws) {
  check_shapes(x, phi, mask, "local_score_gradients");
  if (!(tau > 0.0)) {
    throw DimensionError("local_score_gradients: tau must be positive");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  if (out.grad_phi.empty()) out.grad_phi = allocate_like(phi);
  out.grad_u.resize(d, d);
  Matrix& grad_mask = out.grad_u;  // built as d(score)/d(mask), chained below

  double fit = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const NodeMlp& net = phi[j];
    NodeMlp& g = out.grad_phi[j];

    ws.p.noalias() = mask.col(j).asDiagonal() * net.layers[0].w;
    ws.a1.noalias() = x * ws.p;
    ws.a1 = (ws.a1.rowwise() + net.layers[0].b).array().tanh();
    ws.a2.noalias() = ws.a1 * net.layers[1].w;
    ws.a2 = (ws.a2.rowwise() + net.layers[1].b).array().tanh();
    ws.a3.noalias() = ws.a2 * net.layers[2].w;
    ws.a3 = (ws.a3.rowwise() + net.layers[2].b).array().tanh();
    ws.yhat.noalias() = ws.a3 * net.layers[3].w;
    ws.yhat.array() += net.layers[3].b(0);

    ws.resid = x.col(j) - ws.yhat;
    fit += ws.resid.squaredNorm();
    ws.dy = inv_n * ws.resid;

    g.layers[3].w.noalias() = ws.a3.transpose() * ws.dy;
    g.layers[3].b(0) = ws.dy.sum();

    ws.da.noalias() = ws.dy * net.layers[3].w.transpose();
    ws.delta = ws.da.array() * (1.0 - ws.a3.array().square());
    g.layers[2].w.noalias() = ws.a2.transpose() * ws.delta;
    g.layers[2].b = ws.delta.colwise().sum();

    ws.da.noalias() = ws.delta * net.layers[2].w.transpose();
    ws.delta = ws.da.array() * (1.0 - ws.a2.array().square());
    g.layers[1].w.noalias() = ws.a1.transpose() * ws.delta;
    g.layers[1].b = ws.delta.colwise().sum();

    ws.da.noalias() = ws.delta * net.layers[1].w.transpose();
    ws.delta = ws.da.array() * (1.0 - ws.a1.array().square());
    ws.dp.noalias() = x.transpose() * ws.delta;
    g.layers[0].w.noalias() = mask.col(j).asDiagonal() * ws.dp;
    g.layers[0].b = ws.delta.colwise().sum();

    grad_mask.col(j) = (net.layers[0].w.array() * ws.dp.array())
                           .rowwise()
                           .sum()
                           .matrix();
  }

  out.score = -fit * inv_n / 2.0 - lambda * mask.sum();
  grad_mask.array() -= lambda;
  grad_mask.array() *= mask.array() * (1.0 - mask.array()) / tau;
  grad_mask.diagonal().setZero();
}

LinearScoreGradients linear_score_gradients(const Matrix& x, const Matrix& w,
                                            double lambda) {
  const Eigen::Index d = x.cols();
  if (w.rows() != d || w.cols() != d) {
    throw DimensionError("linear_score_gradients: w must be d x d");
  }
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  Matrix wz = w;
  wz.diagonal().setZero();
  const Matrix resid = x - x * wz;
  LinearScoreGradients out;
  out.score = -resid.squaredNorm() * inv_n / 2.0 -
              lambda * wz.cwiseAbs().sum();
  out.grad_w.noalias() = inv_n * (x.transpose() * resid);
  out.grad_w.array() -= lambda * wz.array().sign();
  out.grad_w.diagonal().setZero();
  return out;
}

double linear_score(const Matrix& x, const Matrix& w, double lambda) {
  Matrix wz = w;
  wz.diagonal().setZero();
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  return -(x - x * wz).squaredNorm() * inv_n / 2.0 -
         lambda * wz.cwiseAbs().sum();
}

}  // namespace fedcd
