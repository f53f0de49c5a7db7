#include "fedcd/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "fedcd/graphmask.hpp"

namespace fedcd {
namespace {

// Uniform on [-2, -0.5] u [0.5, 2], equal mass per side.
double two_sided_coeff(RngStream& stream) {
  const double u = stream.uniform01();
  if (u < 0.5) return -(0.5 + 1.5 * (u / 0.5));
  return 0.5 + 1.5 * ((u - 0.5) / 0.5);
}

Matrix gather_parents(const Matrix& x, const std::vector<int>& parents) {
  Matrix xp(x.rows(), static_cast<Eigen::Index>(parents.size()));
  for (std::size_t c = 0; c < parents.size(); ++c) {
    xp.col(static_cast<Eigen::Index>(c)) = x.col(parents[c]);
  }
  return xp;
}

// RBF Gram matrix with bandwidth one: K_ab = exp(-|xa - xb|^2 / 2).
Matrix rbf_kernel(const Matrix& xp) {
  const Vector sq = xp.rowwise().squaredNorm();
  Matrix k = -2.0 * (xp * xp.transpose());
  k.colwise() += sq;
  k.rowwise() += sq.transpose();
  k = (-0.5 * k.array()).exp().matrix();
  return k;
}

Vector gp_draw(const Matrix& xp, RngStream& stream) {
  const Eigen::Index n = xp.rows();
  const Matrix l = cholesky_psd(rbf_kernel(xp));
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = stream.gaussian();
  return l * z;
}

Vector mechanism_values(const MechanismDescriptor& mech, const Matrix& xp,
                        RngStream& stream, Eigen::Index n) {
  if (xp.cols() == 0) return Vector::Zero(n);
  switch (mech.kind) {
    case MechanismKind::Linear:
      return xp * mech.linear_coeffs;
    case MechanismKind::Gp:
      return gp_draw(xp, stream);
    case MechanismKind::GpAdd: {
      Vector f = Vector::Zero(n);
      for (Eigen::Index c = 0; c < xp.cols(); ++c) {
        f += gp_draw(xp.col(c), stream);
      }
      return f;
    }
    case MechanismKind::MlpFn: {
      Matrix hidden = xp * mech.mlp_w1;
      hidden = (1.0 + (-hidden.array()).exp()).inverse().matrix();
      return hidden * mech.mlp_w2;
    }
    case MechanismKind::Mim: {
      const Vector z1 = xp * mech.mim_w.col(0);
      const Vector z2 = xp * mech.mim_w.col(1);
      const Vector z3 = xp * mech.mim_w.col(2);
      return (z1.array().tanh() + z2.array().cos() + z3.array().sin())
          .matrix();
    }
  }
  throw DimensionError("mechanism_values: unknown mechanism kind");
}

MechanismKind nonlinear_kind(std::uint64_t idx) {
  switch (idx) {
    case 0: return MechanismKind::Gp;
    case 1: return MechanismKind::GpAdd;
    case 2: return MechanismKind::MlpFn;
    default: return MechanismKind::Mim;
  }
}

std::vector<MechanismDescriptor> sample_mechanism_set(
    const BinaryDag& b, Regime regime, MechanismKind iid_kind,
    RngStream& stream) {
  const int d = static_cast<int>(b.rows());
  std::vector<MechanismDescriptor> mechs(d);
  bool linear_client = iid_kind == MechanismKind::Linear;
  if (regime == Regime::NonIid) {
    linear_client = stream.uniform01() < 0.5;
  }
  for (int j = 0; j < d; ++j) {
    int parents = 0;
    for (int i = 0; i < d; ++i) parents += b(i, j) != 0 ? 1 : 0;
    MechanismKind kind = iid_kind;
    if (regime == Regime::NonIid) {
      kind = linear_client ? MechanismKind::Linear
                           : nonlinear_kind(stream.below(4));
    }
    mechs[j] = sample_mechanism(kind, parents, stream);
  }
  return mechs;
}

}  // namespace

const char* graph_model_name(GraphModel g) {
  return g == GraphModel::Er ? "ER" : "SF";
}

const char* regime_name(Regime r) {
  return r == Regime::Iid ? "IID" : "NONIID";
}

const char* mechanism_name(MechanismKind k) {
  switch (k) {
    case MechanismKind::Linear: return "LINEAR";
    case MechanismKind::Gp: return "GP";
    case MechanismKind::GpAdd: return "GP_ADD";
    case MechanismKind::MlpFn: return "MLP";
    case MechanismKind::Mim: return "MIM";
  }
  return "UNKNOWN";
}

void ScenarioSpec::validate() const {
  if (d < 2) throw ConfigError("scenario: d must be at least 2");
  if (edge_factor < 1) throw ConfigError("scenario: edge_factor must be >= 1");
  if (m < 1) throw ConfigError("scenario: client count must be >= 1");
  if (n < 1) throw ConfigError("scenario: observations must be >= 1");
  if (!(iid_noise_var > 0.0)) {
    throw ConfigError("scenario: noise variance must be positive");
  }
}

std::vector<int> topological_order(const BinaryDag& b) {
  const int d = static_cast<int>(b.rows());
  std::vector<int> indeg(d, 0);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (b(i, j) != 0) ++indeg[j];
  std::vector<int> order;
  order.reserve(d);
  std::vector<bool> placed(d, false);
  for (int placed_count = 0; placed_count < d; ++placed_count) {
    int pick = -1;
    for (int j = 0; j < d; ++j) {
      if (!placed[j] && indeg[j] == 0) {
        pick = j;
        break;
      }
    }
    if (pick < 0) {
      throw DimensionError("topological_order: graph has a cycle");
    }
    placed[pick] = true;
    order.push_back(pick);
    for (int j = 0; j < d; ++j)
      if (b(pick, j) != 0) --indeg[j];
  }
  return order;
}

BinaryDag sample_graph(const ScenarioSpec& spec, RngStream& stream) {
  spec.validate();
  const int d = spec.d;
  const int k = spec.edge_factor;
  BinaryDag b = BinaryDag::Zero(d, d);
  if (spec.graph == GraphModel::Er) {
    std::vector<int> perm(d);
    for (int i = 0; i < d; ++i) perm[i] = i;
    for (int i = d - 1; i > 0; --i) {
      const int j = static_cast<int>(
          stream.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(perm[i], perm[j]);
    }
    const double p =
        std::min(1.0, 2.0 * static_cast<double>(k) /
                          static_cast<double>(d - 1));
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        if (stream.uniform01() < p) b(perm[i], perm[j]) = 1;
  } else {
    const int k0 = std::min(k, d - 1);
    std::vector<int> repeated;
    std::vector<int> targets;
    for (int i = 0; i < k0; ++i) targets.push_back(i);
    for (int v = k0; v < d; ++v) {
      for (int t : targets) {
        b(t, v) = 1;
        repeated.push_back(t);
        repeated.push_back(v);
      }
      if (v + 1 == d) break;
      targets.clear();
      while (static_cast<int>(targets.size()) < k0) {
        const int cand = repeated[static_cast<std::size_t>(
            stream.below(repeated.size()))];
        if (std::find(targets.begin(), targets.end(), cand) ==
            targets.end()) {
          targets.push_back(cand);
        }
      }
    }
  }
  return b;
}

MechanismDescriptor sample_mechanism(MechanismKind kind, int parent_count,
                                     RngStream& stream) {
  if (parent_count < 0) {
    throw DimensionError("sample_mechanism: negative parent count");
  }
  MechanismDescriptor mech;
  mech.kind = kind;
  if (parent_count == 0) return mech;
  switch (kind) {
    case MechanismKind::Linear:
      mech.linear_coeffs.resize(parent_count);
      for (int i = 0; i < parent_count; ++i) {
        mech.linear_coeffs(i) = two_sided_coeff(stream);
      }
      break;
    case MechanismKind::MlpFn: {
      constexpr int kWidth = 100;
      mech.mlp_w1.resize(parent_count, kWidth);
      for (int r = 0; r < parent_count; ++r)
        for (int c = 0; c < kWidth; ++c)
          mech.mlp_w1(r, c) = two_sided_coeff(stream);
      mech.mlp_w2.resize(kWidth);
      for (int c = 0; c < kWidth; ++c) mech.mlp_w2(c) = two_sided_coeff(stream);
      break;
    }
    case MechanismKind::Mim:
      mech.mim_w.resize(parent_count, 3);
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < parent_count; ++r)
          mech.mim_w(r, c) = two_sided_coeff(stream);
      break;
    case MechanismKind::Gp:
    case MechanismKind::GpAdd:
      break;
  }
  return mech;
}

Matrix generate_client_data(const BinaryDag& b_true,
                            const std::vector<MechanismDescriptor>& mechanisms,
                            double noise_var, int n,
                            std::vector<RngStream>& node_streams) {
  const int d = static_cast<int>(b_true.rows());
  if (static_cast<int>(mechanisms.size()) != d) {
    throw DimensionError("generate_client_data: one mechanism per node");
  }
  if (static_cast<int>(node_streams.size()) != d) {
    throw DimensionError("generate_client_data: one stream per node");
  }
  if (n < 1) throw DimensionError("generate_client_data: n must be >= 1");
  const double sd = std::sqrt(noise_var);

  Matrix x(n, d);
  for (int j : topological_order(b_true)) {
    std::vector<int> parents;
    for (int i = 0; i < d; ++i)
      if (b_true(i, j) != 0) parents.push_back(i);
    RngStream& s = node_streams[j];
    const Matrix xp = gather_parents(x, parents);
    Vector col = mechanism_values(mechanisms[j], xp, s, n);
    for (int r = 0; r < n; ++r) col(r) += sd * s.gaussian();
    x.col(j) = col;
  }
  return x;
}

Matrix generate_client_data(const BinaryDag& b_true,
                            const std::vector<MechanismDescriptor>& mechanisms,
                            double noise_var, int n, RngStream& stream) {
  std::vector<RngStream> node_streams;
  node_streams.reserve(b_true.rows());
  for (Eigen::Index j = 0; j < b_true.rows(); ++j) {
    node_streams.push_back(stream.split(static_cast<std::uint64_t>(j)));
  }
  return generate_client_data(b_true, mechanisms, noise_var, n, node_streams);
}

Scenario make_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const RngStream root(spec.seed);
  RngStream graph_stream = root.split(0);
  const RngStream mech_root = root.split(1);
  const RngStream data_root = root.split(2);

  Scenario sc;
  sc.truth.b_true = sample_graph(spec, graph_stream);
  sc.datasets.reserve(spec.m);

  if (spec.regime == Regime::Iid) {
    RngStream mech_stream = mech_root;
    const std::vector<MechanismDescriptor> mechs = sample_mechanism_set(
        sc.truth.b_true, Regime::Iid, spec.function_family, mech_stream);
    RngStream data_stream = data_root;
    const Matrix pooled =
        generate_client_data(sc.truth.b_true, mechs, spec.iid_noise_var,
                             spec.m * spec.n, data_stream);
    for (int k = 0; k < spec.m; ++k) {
      sc.datasets.push_back(pooled.middleRows(
          static_cast<Eigen::Index>(k) * spec.n, spec.n));
      sc.truth.client_mechanisms.push_back(mechs);
      sc.truth.client_noise_var.push_back(spec.iid_noise_var);
    }
  } else {
    for (int k = 0; k < spec.m; ++k) {
      RngStream ms = mech_root.split(static_cast<std::uint64_t>(k));
      const bool low_noise = ms.uniform01() < 0.5;
      const double var = low_noise ? 0.8 : 1.0;
      const std::vector<MechanismDescriptor> mechs = sample_mechanism_set(
          sc.truth.b_true, Regime::NonIid, spec.function_family, ms);
      RngStream ds = data_root.split(static_cast<std::uint64_t>(k));
      sc.datasets.push_back(
          generate_client_data(sc.truth.b_true, mechs, var, spec.n, ds));
      sc.truth.client_mechanisms.push_back(mechs);
      sc.truth.client_noise_var.push_back(var);
    }
  }
  return sc;
}

}  // namespace fedcd
