#pragma once

#include <vector>

#include "fedcd/numkit.hpp"

namespace fedcd {

struct MetricsReport {
  long shd = 0;
  double tpr = 0.0;
  double fdr = 0.0;
  long nnz = 0;
};

// Structural Hamming distance between two directed graphs: insertions plus
// deletions plus reversals, a reversed edge costing one edit.
long shd(const BinaryDag& b_est, const BinaryDag& b_true);

// TP = correctly directed edges, R = reversed edges, FP = estimated edges
// absent from the truth skeleton.  tpr = TP / max(1, |E_true|) and
// fdr = (R + FP) / max(1, nnz); reversals count as false discoveries.
MetricsReport tpr_fdr_nnz(const BinaryDag& b_est, const BinaryDag& b_true);

// Full report (shd + rates) in one call.
MetricsReport evaluate_graph(const BinaryDag& b_est, const BinaryDag& b_true);

// Exhaustive acyclicity check for d <= 6: true iff some vertex order makes
// every edge point forward.  Independent of is_dag for cross-validation.
bool brute_force_dag_oracle(const BinaryDag& b);

}  // namespace fedcd
