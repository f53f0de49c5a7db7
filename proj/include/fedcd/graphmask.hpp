#pragma once

#include "fedcd/numkit.hpp"

namespace fedcd {

// Soft adjacency mask sampled from proxy logits via the Gumbel-Sigmoid
// relaxation: M_ij = sigmoid((U_ij + g1 - g0) / tau) with independent
// standard Gumbel draws g1, g0 per entry.  Diagonal entries are forced to
// zero (no self-loops).
Matrix gumbel_sigmoid(const Matrix& u, double tau, RngStream& stream);

// Expected mask under zero noise: sigmoid(U / tau), zero diagonal.
Matrix gumbel_sigmoid(const Matrix& u, double tau);

// Acyclicity penalty h(M) = Tr[exp(M)] - d.  Zero iff the weighted graph M
// (non-negative entries) has no directed cycle.
double acyclicity_value(const Matrix& mask);

// Gradient of h with respect to the proxy logits U through the sigmoid
// reparameterization: exp(M)^T o M o (1 - M) / tau, zero diagonal.
Matrix acyclicity_gradient(double tau, const Matrix& mask);

// Fused evaluation sharing one matrix exponential.
struct AcyclicityEval {
  double value;
  Matrix gradient;
};
AcyclicityEval acyclicity_value_and_gradient(double tau, const Matrix& mask);

// True iff the 0/1 adjacency matrix b has no directed cycle.
bool is_dag(const BinaryDag& b);

// Removes the minimum-weight edge that participates in a directed cycle,
// repeating until the graph is acyclic.  Ties break on (row, col) order.
// An edge i->j participates in a cycle iff j reaches i through b.
BinaryDag prune_cycles(BinaryDag b, const Matrix& weights);

// Hard-thresholds a soft mask into an adjacency matrix (strict >) and prunes
// cycle edges by ascending mask weight until the result is a DAG.
BinaryDag threshold_to_dag(const Matrix& mask, double threshold = 0.5);

}  // namespace fedcd
