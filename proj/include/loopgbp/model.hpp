#pragma once

// Pairwise Gaussian model on a closed chain of hidden states x_0..x_N with a
// private observation y_k per node. Everything is kept in information form:
// a potential contributes the quadratic -1/2 [u; v]^T [[p11, p12],[p12^T, p22]] [u; v]
// to the joint log-density. Node indices wrap modulo num_nodes throughout.

#include <cstdint>
#include <string>
#include <vector>

#include "loopgbp/common.hpp"

namespace loopgbp {

// Potential on edge (k, k+1 mod K): u = x_k, v = x_{k+1}. Blocks are n x n.
struct EdgePotential {
  Matrix p11;
  Matrix p12;
  Matrix p22;
};

// Potential tying node k to its observation: u = x_k (n), v = y_k (m).
struct NodePotential {
  Matrix p11;  // n x n, symmetric PSD
  Matrix p12;  // n x m
  Matrix p22;  // m x m, symmetric PD
};

struct CyclicModel {
  int num_nodes = 0;  // K = N+1, at least 3
  int state_dim = 0;  // n
  int obs_dim = 0;    // m
  std::vector<EdgePotential> edges;  // edges[k] joins (k, k+1 mod K); size K
  std::vector<NodePotential> nodes;  // size K
};

struct Evidence {
  std::vector<Vector> observations;  // K vectors of length m
};

// Conditioning node k on y_k yields a Gaussian factor on x_k alone:
// j = p11, h = -p12 * y.
struct EvidenceMessage {
  Matrix j;
  Vector h;
};

// One exact joint draw: hidden path plus the observations it generated.
struct PathSample {
  std::vector<Vector> states;
  Evidence evidence;
};

// Information form of the joint over the hidden path given the evidence.
struct JointInformation {
  Matrix j;
  Vector h;
};

// Returns human-readable invariant violations, empty when the model is valid.
// Checked: counts and dimensions, block symmetry, PSD of each assembled edge
// block, node p11 PSD and p22 PD, and PD of the evidence-conditioned joint.
std::vector<std::string> validate(const CyclicModel& model);

// Throws std::invalid_argument listing the violations, if any.
void require_valid(const CyclicModel& model);

EvidenceMessage evidence_message(const NodePotential& node, const Vector& y);
std::vector<EvidenceMessage> evidence_messages(const CyclicModel& model,
                                               const Evidence& ev);

// Assembles the full (K*n) precision/potential over the hidden path with the
// evidence folded in. Throws DegeneracyError if the result is not PD.
JointInformation joint_information(const CyclicModel& model, const Evidence& ev);

// Exact joint draws from the zero-mean Gaussian the potentials define.
// Deterministic given seed.
std::vector<PathSample> sample(const CyclicModel& model, std::uint64_t seed,
                               int count);

// Random valid model. coupling_strength in [0, 1) scales the edge cross
// blocks relative to the diagonal blocks (0 decouples the loop entirely).
CyclicModel random_model(int num_nodes, int state_dim, int obs_dim,
                         double coupling_strength, std::uint64_t seed);

}  // namespace loopgbp
