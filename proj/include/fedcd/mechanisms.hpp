#pragma once

#include <vector>

#include "fedcd/numkit.hpp"

namespace fedcd {

constexpr int kHiddenWidth = 16;
constexpr int kMlpLayers = 4;

struct DenseLayer {
  Matrix w;
  RowVector b;
};

// One regression network per node: d -> 16 -> 16 -> 16 -> 1 with tanh hidden
// activations and an identity output layer.
struct NodeMlp {
  std::vector<DenseLayer> layers;
};

using MlpStack = std::vector<NodeMlp>;

// Xavier-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
// Draws consume the stream in node order, layer order, row-major entry order.
MlpStack mlp_init(int d, RngStream& stream, int hidden = kHiddenWidth);

// Predictions for every node: column j is phi_j applied to the input rows
// with column scaling mask(:, j), i.e. each node sees only its masked
// parents.  Throws DimensionError on shape mismatches.
Matrix masked_forward(const MlpStack& phi, const Matrix& mask, const Matrix& x);

// Regularized local fit
//   score = -1/(2n) * sum_j ||x_j - phi_j(mask_j o x)||^2 - lambda * sum(mask)
double local_score(const Matrix& x, const MlpStack& phi, const Matrix& mask,
                   double lambda);

// Ascent gradients of the local score with respect to the network weights
// and, through the sigmoid reparameterization at temperature tau, the proxy
// logits U (so grad_u includes the mask * (1 - mask) / tau chain factor).
struct ScoreGradients {
  double score = 0.0;
  MlpStack grad_phi;
  Matrix grad_u;
};

// Reusable intermediate buffers so repeated gradient evaluations allocate
// nothing after the first call.
struct MlpWorkspace {
  Matrix p, a1, a2, a3, da, delta, dp;
  Vector yhat, dy, resid;
};

ScoreGradients local_score_gradients(const Matrix& x, const MlpStack& phi,
                                     const Matrix& mask, double tau,
                                     double lambda);

void local_score_gradients_into(const Matrix& x, const MlpStack& phi,
                                const Matrix& mask, double tau, double lambda,
                                ScoreGradients& out, MlpWorkspace& ws);

// Linear structural model score and gradient: predictions are x * w with a
// zero diagonal, the penalty is lambda * ||w||_1 with sign subgradient.
struct LinearScoreGradients {
  double score = 0.0;
  Matrix grad_w;
};

LinearScoreGradients linear_score_gradients(const Matrix& x, const Matrix& w,
                                            double lambda);

double linear_score(const Matrix& x, const Matrix& w, double lambda);

}  // namespace fedcd
