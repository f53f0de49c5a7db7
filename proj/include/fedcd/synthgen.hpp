#pragma once

#include <vector>

#include "fedcd/numkit.hpp"

namespace fedcd {

enum class GraphModel { Er, Sf };
enum class MechanismKind { Linear, Gp, GpAdd, MlpFn, Mim };
enum class Regime { Iid, NonIid };

const char* graph_model_name(GraphModel g);
const char* regime_name(Regime r);
const char* mechanism_name(MechanismKind k);

// Parameters of one node's structural function.  GP kinds carry no
// parameters here; their function values are realized jointly over the
// observed parent rows at generation time.
struct MechanismDescriptor {
  MechanismKind kind = MechanismKind::Gp;
  Vector linear_coeffs;  // Linear: one per parent
  Matrix mlp_w1;         // MlpFn: parent_count x 100
  Vector mlp_w2;         // MlpFn: 100
  Matrix mim_w;          // Mim: parent_count x 3 (columns w1, w2, w3)
};

struct GroundTruth {
  BinaryDag b_true;
  std::vector<std::vector<MechanismDescriptor>> client_mechanisms;  // [m][d]
  std::vector<double> client_noise_var;                             // [m]
};

struct ScenarioSpec {
  int d = 10;
  GraphModel graph = GraphModel::Er;
  int edge_factor = 2;  // expected edge count is edge_factor * d
  int m = 10;
  int n = 600;  // observations per client
  Regime regime = Regime::Iid;
  MechanismKind function_family = MechanismKind::Gp;  // IID regime only
  double iid_noise_var = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Scenario {
  GroundTruth truth;
  std::vector<Matrix> datasets;
};

// ER: random permutation fixes a topological order, then each forward edge
// is kept independently with p = 2k/(d-1) clipped to [0, 1].  SF: Barabasi-
// Albert preferential attachment with k edges per arriving node, oriented
// from earlier to later nodes.  Both are DAGs by construction.
BinaryDag sample_graph(const ScenarioSpec& spec, RngStream& stream);

MechanismDescriptor sample_mechanism(MechanismKind kind, int parent_count,
                                     RngStream& stream);

// Ancestral sampling of n rows: nodes are visited in topological order, each
// column is the node's structural function of its realized parents plus
// N(0, noise_var) noise.  Each node consumes only its own stream, so a
// node's draws perturb exactly its descendants.
Matrix generate_client_data(const BinaryDag& b_true,
                            const std::vector<MechanismDescriptor>& mechanisms,
                            double noise_var, int n,
                            std::vector<RngStream>& node_streams);

Matrix generate_client_data(const BinaryDag& b_true,
                            const std::vector<MechanismDescriptor>& mechanisms,
                            double noise_var, int n, RngStream& stream);

// IID: one mechanism set and one noise variance; m*n rows generated in one
// block and split evenly, so pooled data follows a single distribution.
// NONIID: per client, a fair coin picks linear vs nonlinear mechanisms (the
// nonlinear kind is drawn per node), and noise variance is 0.8 or 1.0.
Scenario make_scenario(const ScenarioSpec& spec);

// Topological order of a DAG (Kahn), lowest index first among ready nodes.
std::vector<int> topological_order(const BinaryDag& b);

}  // namespace fedcd
