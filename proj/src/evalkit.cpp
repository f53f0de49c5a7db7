#include "fedcd/evalkit.hpp"

#include <algorithm>

namespace fedcd {
namespace {

void check_pair(const BinaryDag& a, const BinaryDag& b, const char* who) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw DimensionError(std::string(who) +
                         ": graphs must be square and equal-sized");
  }
}

}  // namespace

long shd(const BinaryDag& b_est, const BinaryDag& b_true) {
  check_pair(b_est, b_true, "shd");
  const int d = static_cast<int>(b_est.rows());
  long edits = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const bool ef = b_est(i, j) != 0, er = b_est(j, i) != 0;
      const bool tf = b_true(i, j) != 0, tr = b_true(j, i) != 0;
      if (ef == tf && er == tr) continue;
      const bool est_any = ef || er;
      const bool true_any = tf || tr;
      if (est_any && true_any) {
        edits += 1;  // reversal (or one-sided 2-cycle repair) costs one
      } else {
        edits += (ef ? 1 : 0) + (er ? 1 : 0) + (tf ? 1 : 0) + (tr ? 1 : 0);
      }
    }
  }
  return edits;
}

MetricsReport tpr_fdr_nnz(const BinaryDag& b_est, const BinaryDag& b_true) {
  check_pair(b_est, b_true, "tpr_fdr_nnz");
  const int d = static_cast<int>(b_est.rows());
  long tp = 0, rev = 0, fp = 0, nnz = 0, true_edges = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      if (b_true(i, j) != 0) ++true_edges;
      if (b_est(i, j) == 0) continue;
      ++nnz;
      if (b_true(i, j) != 0) {
        ++tp;
      } else if (b_true(j, i) != 0) {
        ++rev;
      } else {
        ++fp;
      }
    }
  }
  MetricsReport rep;
  rep.nnz = nnz;
  rep.tpr = static_cast<double>(tp) /
            static_cast<double>(std::max<long>(1, true_edges));
  rep.fdr = static_cast<double>(rev + fp) /
            static_cast<double>(std::max<long>(1, nnz));
  return rep;
}

MetricsReport evaluate_graph(const BinaryDag& b_est, const BinaryDag& b_true) {
  MetricsReport rep = tpr_fdr_nnz(b_est, b_true);
  rep.shd = shd(b_est, b_true);
  return rep;
}

bool brute_force_dag_oracle(const BinaryDag& b) {
  if (b.rows() != b.cols()) {
    throw DimensionError("brute_force_dag_oracle: matrix must be square");
  }
  const int d = static_cast<int>(b.rows());
  if (d > 6) {
    throw DimensionError("brute_force_dag_oracle: refuses d > 6");
  }
  std::vector<int> pos(d);
  for (int i = 0; i < d; ++i) pos[i] = i;
  do {
    bool ok = true;
    for (int i = 0; i < d && ok; ++i)
      for (int j = 0; j < d && ok; ++j)
        if (b(i, j) != 0 && pos[i] >= pos[j]) ok = false;
    if (ok) return true;
  } while (std::next_permutation(pos.begin(), pos.end()));
  return false;
}

}  // namespace fedcd
