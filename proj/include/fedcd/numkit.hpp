#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "fedcd/errors.hpp"

namespace fedcd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using BinaryDag = Eigen::MatrixXi;

// Matrix exponential by scaling-and-squaring with a truncated Taylor
// expansion.  The input is scaled so its 1-norm is at most 0.5, expanded to
// order 18 by Horner evaluation, then squared back up.
Matrix matexp(const Matrix& m);

// Gradient of Tr[exp(M)] with respect to M, i.e. exp(M) transposed.
Matrix trace_exp_gradient(const Matrix& m);

// Lower Cholesky factor of a symmetric positive semi-definite matrix.
// If the plain factorization fails, a diagonal jitter proportional to the
// mean diagonal is added, escalating from 1e-10 to 1e-4 by decades.
Matrix cholesky_psd(const Matrix& k);

// Deterministic counter-based random stream.  A stream is identified by a
// 64-bit key derived from (seed, stream_id); draws hash the key together
// with an incrementing counter, so any draw sequence is reproducible from
// the construction arguments alone.  split(child_id) derives a child stream
// from the parent's identity (not its position), which lets parallel work
// carve out independent streams up front.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  // Child stream derived from this stream's identity and child_id.
  // Does not consume or disturb the parent's draw sequence.
  RngStream split(std::uint64_t child_id) const;

  std::uint64_t next_u64();

  // Uniform double in the open interval (0, 1).
  double uniform01();

  // Standard normal via Box-Muller (consumes two uniforms per call).
  double gaussian();

  // Standard Gumbel: -log(-log(u)).
  double gumbel();

  // Uniform integer in [0, n).  Throws DimensionError when n == 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t base_;
  std::uint64_t counter_;
};

// Deterministic per-repetition seed derivation used by experiment drivers.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

}  // namespace fedcd
