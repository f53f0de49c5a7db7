#include "fedcd/numkit.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace fedcd {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

void require_square(const Matrix& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(who) + ": matrix must be square, got " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
  if (!m.allFinite()) {
    throw DimensionError(std::string(who) + ": matrix has non-finite entries");
  }
}

}  // namespace

Matrix matexp(const Matrix& m) {
  require_square(m, "matexp");
  const Eigen::Index d = m.rows();
  if (d == 0) return Matrix(0, 0);

  double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const Matrix a = m / std::ldexp(1.0, squarings);

  const Matrix id = Matrix::Identity(d, d);
  Matrix acc = id;
  Matrix tmp(d, d);
  for (int k = 18; k >= 1; --k) {
    tmp.noalias() = (a / static_cast<double>(k)) * acc;
    acc = id + tmp;
  }
  for (int i = 0; i < squarings; ++i) {
    tmp.noalias() = acc * acc;
    acc.swap(tmp);
  }
  return acc;
}

Matrix trace_exp_gradient(const Matrix& m) { return matexp(m).transpose(); }

Matrix cholesky_psd(const Matrix& k) {
  require_square(k, "cholesky_psd");
  const Eigen::Index d = k.rows();
  if (d == 0) return Matrix(0, 0);

  const double scale = k.cwiseAbs().maxCoeff();
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(scale, 1.0)) {
    throw DimensionError("cholesky_psd: matrix is not symmetric");
  }

  Eigen::LLT<Matrix> llt(k);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  double base = k.diagonal().mean();
  if (!(base > 0.0)) base = 1.0;
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-12); rel *= 10.0) {
    llt.compute(k + rel * base * Matrix::Identity(d, d));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw FactorizationError(
      "cholesky_psd: factorization failed even with jitter 1e-4");
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : base_(mix64(mix64(seed + kGolden) ^
                  mix64(stream_id * 0xDA942042E4DD58B5ULL + kGolden))),
      counter_(0) {}

RngStream RngStream::split(std::uint64_t child_id) const {
  return RngStream(base_, child_id + 1);
}

std::uint64_t RngStream::next_u64() {
  return mix64(base_ + (++counter_) * kGolden);
}

double RngStream::uniform01() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::gaussian() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

double RngStream::gumbel() { return -std::log(-std::log(uniform01())); }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw DimensionError("RngStream::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  return RngStream(master_seed).split(index).next_u64();
}

}  // namespace fedcd
