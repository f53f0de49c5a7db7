#include "fedcd/graphmask.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fedcd {
namespace {

void require_square_mask(const Matrix& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(who) + ": matrix must be square");
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Reachability closure of a 0/1 adjacency matrix (Floyd-Warshall).
std::vector<std::vector<bool>> reach_closure(const BinaryDag& b) {
  const int d = static_cast<int>(b.rows());
  std::vector<std::vector<bool>> r(d, std::vector<bool>(d, false));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) r[i][j] = b(i, j) != 0;
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i) {
      if (!r[i][k]) continue;
      for (int j = 0; j < d; ++j)
        if (r[k][j]) r[i][j] = true;
    }
  return r;
}

}  // namespace

Matrix gumbel_sigmoid(const Matrix& u, double tau, RngStream& stream) {
  require_square_mask(u, "gumbel_sigmoid");
  if (!(tau > 0.0)) {
    throw DimensionError("gumbel_sigmoid: tau must be positive");
  }
  const Eigen::Index d = u.rows();
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double g1 = stream.gumbel();
      const double g0 = stream.gumbel();
      m(i, j) = (i == j) ? 0.0 : sigmoid((u(i, j) + g1 - g0) / tau);
    }
  }
  return m;
}

Matrix gumbel_sigmoid(const Matrix& u, double tau) {
  require_square_mask(u, "gumbel_sigmoid");
  if (!(tau > 0.0)) {
    throw DimensionError("gumbel_sigmoid: tau must be positive");
  }
  Matrix m = (1.0 + (-u.array() / tau).exp()).inverse().matrix();
  m.diagonal().setZero();
  return m;
}

double acyclicity_value(const Matrix& mask) {
  require_square_mask(mask, "acyclicity_value");
  return matexp(mask).trace() - static_cast<double>(mask.rows());
}

Matrix acyclicity_gradient(double tau, const Matrix& mask) {
  return acyclicity_value_and_gradient(tau, mask).gradient;
}

AcyclicityEval acyclicity_value_and_gradient(double tau, const Matrix& mask) {
  require_square_mask(mask, "acyclicity_gradient");
  if (!(tau > 0.0)) {
    throw DimensionError("acyclicity_gradient: tau must be positive");
  }
  const Matrix em = matexp(mask);
  AcyclicityEval out;
  out.value = em.trace() - static_cast<double>(mask.rows());
  out.gradient = (em.transpose().array() * mask.array() *
                  (1.0 - mask.array()) / tau)
                     .matrix();
  out.gradient.diagonal().setZero();
  return out;
}

bool is_dag(const BinaryDag& b) {
  if (b.rows() != b.cols()) throw DimensionError("is_dag: matrix must be square");
  const int d = static_cast<int>(b.rows());
  std::vector<int> indeg(d, 0);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (b(i, j) != 0) ++indeg[j];
  std::vector<int> queue;
  queue.reserve(d);
  for (int j = 0; j < d; ++j)
    if (indeg[j] == 0) queue.push_back(j);
  int removed = 0;
  while (!queue.empty()) {
    const int v = queue.back();
    queue.pop_back();
    ++removed;
    for (int j = 0; j < d; ++j)
      if (b(v, j) != 0 && --indeg[j] == 0) queue.push_back(j);
  }
  return removed == d;
}

BinaryDag prune_cycles(BinaryDag b, const Matrix& weights) {
  if (b.rows() != b.cols() || weights.rows() != b.rows() ||
      weights.cols() != b.cols()) {
    throw DimensionError("prune_cycles: adjacency and weights must be square "
                         "and equal-sized");
  }
  const int d = static_cast<int>(b.rows());
  while (!is_dag(b)) {
    const auto reach = reach_closure(b);
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (b(i, j) == 0) continue;
        if (!reach[j][i]) continue;  // edge i->j is on a cycle iff j reaches i
        if (weights(i, j) < best) {
          best = weights(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    b(bi, bj) = 0;
  }
  return b;
}

BinaryDag threshold_to_dag(const Matrix& mask, double threshold) {
  require_square_mask(mask, "threshold_to_dag");
  const Eigen::Index d = mask.rows();
  BinaryDag b = BinaryDag::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j && mask(i, j) > threshold) b(i, j) = 1;
  return prune_cycles(std::move(b), mask);
}

}  // namespace fedcd
