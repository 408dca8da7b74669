#pragma once

// Gaussian belief propagation on the closed chain, parallel (Jacobi)
// schedule: every directed message is recomputed from the frozen previous
// state. Message bookkeeping:
//   forward[k]  carries x_{k-1} -> x_k  (clockwise),   over edges[(k-1+K)%K]
//   backward[k] carries x_{k+1} -> x_k  (anticlockwise), over edges[k]
// so the belief at node k multiplies forward[k], backward[k] and the local
// evidence factor.

#include <vector>

#include "loopgbp/model.hpp"

namespace loopgbp::bp {

struct Message {
  Matrix j;
  Vector h;
};

struct BpState {
  std::vector<Message> forward;
  std::vector<Message> backward;
  int iteration = 0;
};

struct BpConfig {
  int max_iterations = 1000;
  double tolerance = 1e-10;      // relative change threshold, must be > 0
  double init_precision = 0.0;   // messages start at j = eps*I, h = 0
  double damping = 0.0;          // in [0, 1): new = (1-g)*computed + g*old
};

struct Belief {
  Matrix j_hat;
  Vector h_hat;
  Vector mean;        // j_hat^-1 h_hat
  Matrix covariance;  // j_hat^-1
};

enum class ConvergenceStatus { converged, max_iterations, diverged };

// One row per committed iteration: the relative deltas that drove the stop
// test and the Frobenius norm of every directed message precision
// (forward 0..K-1 then backward 0..K-1).
struct TraceRow {
  int iteration;
  double max_delta_j;
  double max_delta_h;
  std::vector<double> j_frobenius;
};
using DiagnosticsTrace = std::vector<TraceRow>;

struct RunResult {
  std::vector<Belief> beliefs;
  DiagnosticsTrace trace;
  ConvergenceStatus status = ConvergenceStatus::max_iterations;
  int iterations = 0;  // committed (state-changing) iterations
  BpState state;       // final message state
};

// Single directed-message updates. `edge_index` only labels errors.
Message forward_step(const EdgePotential& edge, const EvidenceMessage& ev,
                     const Message& incoming, int edge_index = -1);
Message backward_step(const EdgePotential& edge, const EvidenceMessage& ev,
                      const Message& incoming, int edge_index = -1);

BpState initial_state(const CyclicModel& model, const BpConfig& config);

// One parallel update of all 2K directed messages, damping applied.
// Serial and OpenMP execution agree bitwise.
BpState parallel_iteration(const CyclicModel& model,
                           const std::vector<EvidenceMessage>& ev,
                           const BpState& state, const BpConfig& config,
                           Execution exec = Execution::openmp);

// Gauss-Seidel reference schedule (forward k ascending, then backward k
// descending, in place). Converges to the same fixed point; used to check
// schedule independence.
BpState sweep_iteration(const CyclicModel& model,
                        const std::vector<EvidenceMessage>& ev,
                        const BpState& state, const BpConfig& config);

// Beliefs from a message state. Throws DegeneracyError naming the node if
// some belief precision is not PD.
std::vector<Belief> beliefs_from_state(const CyclicModel& model,
                                       const std::vector<EvidenceMessage>& ev,
                                       const BpState& state);

// Iterates until no message moves by more than config.tolerance in the
// relative metric max(||dJ||_F/(1+||J||_F), ||dh||_2/(1+||h||_2)). A run
// reports `converged` when one further parallel_iteration would change
// nothing beyond tolerance; that probe is not counted in `iterations`.
// Divergence (any message ||J||_F > 1e12) short-circuits with empty beliefs.
RunResult run(const CyclicModel& model, const Evidence& ev,
              const BpConfig& config = {}, Execution exec = Execution::openmp);

// Same, with edge cut_edge removed from the loop: the two directed messages
// that would traverse it are pinned at zero information, which makes the
// graph a chain and BP exact.
RunResult run_on_cut_loop(const CyclicModel& model, const Evidence& ev,
                          int cut_edge, const BpConfig& config = {},
                          Execution exec = Execution::openmp);

}  // namespace loopgbp::bp
