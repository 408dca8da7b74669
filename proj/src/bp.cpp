#include "loopgbp/bp.hpp"

#include <cmath>
#include <sstream>

#include "loopgbp/cone_geometry.hpp"
#include "schur_kernel.hpp"

namespace loopgbp::bp {

namespace {

constexpr double kDivergenceNorm = 1e12;

void check_config(const BpConfig& config) {
  if (config.max_iterations < 1)
    throw std::invalid_argument("BpConfig: max_iterations must be at least 1");
  if (!(config.tolerance > 0.0))
    throw std::invalid_argument("BpConfig: tolerance must be positive");
  if (!(config.init_precision >= 0.0))
    throw std::invalid_argument("BpConfig: init_precision must be nonnegative");
  if (!(config.damping >= 0.0 && config.damping < 1.0))
    throw std::invalid_argument("BpConfig: damping must lie in [0, 1)");
}

void check_incoming(const EdgePotential& edge, const EvidenceMessage& ev,
                    const Message& incoming) {
  Eigen::Index n = edge.p11.rows();
  if (ev.j.rows() != n || incoming.j.rows() != n || incoming.j.cols() != n ||
      incoming.h.size() != n || ev.h.size() != n)
    throw std::invalid_argument("message update: dimension mismatch between edge, evidence and incoming message");
}

Message zero_message(int n) {
  return Message{Matrix::Zero(n, n), Vector::Zero(n)};
}

Message damped(const Message& computed, const Message& previous, double gamma) {
  if (gamma <= 0.0) return computed;
  Message out;
  out.j = (1.0 - gamma) * computed.j + gamma * previous.j;
  out.h = (1.0 - gamma) * computed.h + gamma * previous.h;
  return out;
}

// One update of all 2K directed messages from the frozen previous state.
// cut_edge < 0 means the full loop; otherwise the two messages traversing
// that edge stay pinned at zero information. Every slot is independent, so
// OpenMP and serial execution produce identical bits.
BpState iteration_step(const CyclicModel& model,
                       const std::vector<EvidenceMessage>& ev,
                       const BpState& state, const BpConfig& config,
                       int cut_edge, Execution exec) {
  int k = model.num_nodes;
  int n = model.state_dim;
  BpState next;
  next.forward.resize(k);
  next.backward.resize(k);
  next.iteration = state.iteration + 1;

  std::vector<std::string> errors(2 * k);
  std::vector<int> error_index(2 * k, -1);
  std::vector<char> failed(2 * k, 0);

  bool use_omp = exec == Execution::openmp;
#pragma omp parallel for schedule(static) if (use_omp)
  for (int slot = 0; slot < 2 * k; ++slot) {
    try {
      if (slot < k) {
        // forward[slot] rides edge (slot-1 -> slot).
        int e = (slot - 1 + k) % k;
        if (e == cut_edge) {
          next.forward[slot] = zero_message(n);
        } else {
          Message computed =
              forward_step(model.edges[e], ev[e], state.forward[e], e);
          next.forward[slot] = damped(computed, state.forward[slot], config.damping);
        }
      } else {
        // backward[node] rides edge (node+1 -> node) = edges[node].
        int node = slot - k;
        int e = node;
        if (e == cut_edge) {
          next.backward[node] = zero_message(n);
        } else {
          Message computed = backward_step(model.edges[e], ev[(node + 1) % k],
                                           state.backward[(node + 1) % k], e);
          next.backward[node] = damped(computed, state.backward[node], config.damping);
        }
      }
    } catch (const SingularityError& err) {
      failed[slot] = 1;
      errors[slot] = err.what();
      error_index[slot] = err.index;
    } catch (const std::exception& err) {
      failed[slot] = 1;
      errors[slot] = err.what();
    }
  }
  for (int slot = 0; slot < 2 * k; ++slot)
    if (failed[slot]) throw SingularityError(errors[slot], error_index[slot]);
  return next;
}

double relative_delta_j(const Message& next, const Message& prev) {
  return (next.j - prev.j).norm() / (1.0 + next.j.norm());
}

double relative_delta_h(const Message& next, const Message& prev) {
  return (next.h - prev.h).norm() / (1.0 + next.h.norm());
}

struct StateDelta {
  double max_j = 0.0;
  double max_h = 0.0;
};

StateDelta state_delta(const BpState& next, const BpState& prev) {
  StateDelta d;
  for (size_t i = 0; i < next.forward.size(); ++i) {
    d.max_j = std::max(d.max_j, relative_delta_j(next.forward[i], prev.forward[i]));
    d.max_h = std::max(d.max_h, relative_delta_h(next.forward[i], prev.forward[i]));
    d.max_j = std::max(d.max_j, relative_delta_j(next.backward[i], prev.backward[i]));
    d.max_h = std::max(d.max_h, relative_delta_h(next.backward[i], prev.backward[i]));
  }
  return d;
}

std::vector<double> precision_norms(const BpState& state) {
  std::vector<double> out;
  out.reserve(2 * state.forward.size());
  for (const Message& msg : state.forward) out.push_back(msg.j.norm());
  for (const Message& msg : state.backward) out.push_back(msg.j.norm());
  return out;
}

bool diverged(const std::vector<double>& norms) {
  for (double v : norms)
    if (!(v <= kDivergenceNorm)) return true;
  return false;
}

RunResult run_impl(const CyclicModel& model, const Evidence& ev, int cut_edge,
                   const BpConfig& config, Execution exec) {
  check_config(config);
  require_valid(model);
  std::vector<EvidenceMessage> msgs = evidence_messages(model, ev);

  BpState state = initial_state(model, config);
  if (cut_edge >= 0) {
    int k = model.num_nodes, n = model.state_dim;
    state.forward[(cut_edge + 1) % k] = zero_message(n);
    state.backward[cut_edge] = zero_message(n);
  }

  RunResult res;
  int committed = 0;
  for (int turn = 1; turn <= config.max_iterations; ++turn) {
    BpState candidate = iteration_step(model, msgs, state, config, cut_edge, exec);
    std::vector<double> norms = precision_norms(candidate);
    if (diverged(norms)) {
      res.status = ConvergenceStatus::diverged;
      res.iterations = committed;
      res.state = std::move(candidate);
      return res;  // beliefs left empty; the state is not usable
    }
    StateDelta delta = state_delta(candidate, state);
    if (delta.max_j <= config.tolerance && delta.max_h <= config.tolerance) {
      // One more iteration changes nothing beyond tolerance: converged.
      // The probe is discarded and not counted.
      res.status = ConvergenceStatus::converged;
      break;
    }
    state = std::move(candidate);
    committed = turn;
    res.trace.push_back(TraceRow{turn, delta.max_j, delta.max_h, std::move(norms)});
    if (turn == config.max_iterations) res.status = ConvergenceStatus::max_iterations;
  }
  res.iterations = committed;
  res.state = state;
  res.beliefs = beliefs_from_state(model, msgs, state);
  return res;
}

}  // namespace

Message forward_step(const EdgePotential& edge, const EvidenceMessage& ev,
                     const Message& incoming, int edge_index) {
  check_incoming(edge, ev, incoming);
  // Grouping (p11 + ev.j) + incoming.j matches the extracted map's c + J.
  Matrix s = (edge.p11 + ev.j) + incoming.j;
  detail::SpdSolver solver(s, "forward message at edge", edge_index);
  Message out;
  out.j = detail::schur_complement(edge.p22, edge.p12.transpose(), solver);
  out.h = -edge.p12.transpose() * solver.solve(ev.h + incoming.h);
  return out;
}

Message backward_step(const EdgePotential& edge, const EvidenceMessage& ev,
                      const Message& incoming, int edge_index) {
  check_incoming(edge, ev, incoming);
  Matrix s = (edge.p22 + ev.j) + incoming.j;
  detail::SpdSolver solver(s, "backward message at edge", edge_index);
  Message out;
  out.j = detail::schur_complement(edge.p11, edge.p12, solver);
  out.h = -edge.p12 * solver.solve(ev.h + incoming.h);
  return out;
}

BpState initial_state(const CyclicModel& model, const BpConfig& config) {
  check_config(config);
  int n = model.state_dim;
  Message init{config.init_precision * Matrix::Identity(n, n), Vector::Zero(n)};
  BpState state;
  state.forward.assign(model.num_nodes, init);
  state.backward.assign(model.num_nodes, init);
  state.iteration = 0;
  return state;
}

BpState parallel_iteration(const CyclicModel& model,
                           const std::vector<EvidenceMessage>& ev,
                           const BpState& state, const BpConfig& config,
                           Execution exec) {
  check_config(config);
  if (int(ev.size()) != model.num_nodes ||
      int(state.forward.size()) != model.num_nodes ||
      int(state.backward.size()) != model.num_nodes)
    throw std::invalid_argument("parallel_iteration: state/evidence size does not match the model");
  return iteration_step(model, ev, state, config, /*cut_edge=*/-1, exec);
}

BpState sweep_iteration(const CyclicModel& model,
                        const std::vector<EvidenceMessage>& ev,
                        const BpState& state, const BpConfig& config) {
  check_config(config);
  int k = model.num_nodes;
  BpState next = state;
  next.iteration = state.iteration + 1;
  for (int node = 0; node < k; ++node) {
    int e = (node - 1 + k) % k;
    Message computed = forward_step(model.edges[e], ev[e], next.forward[e], e);
    next.forward[node] = damped(computed, next.forward[node], config.damping);
  }
  for (int node = k - 1; node >= 0; --node) {
    Message computed = backward_step(model.edges[node], ev[(node + 1) % k],
                                     next.backward[(node + 1) % k], node);
    next.backward[node] = damped(computed, next.backward[node], config.damping);
  }
  return next;
}

std::vector<Belief> beliefs_from_state(const CyclicModel& model,
                                       const std::vector<EvidenceMessage>& ev,
                                       const BpState& state) {
  int k = model.num_nodes, n = model.state_dim;
  std::vector<Belief> beliefs;
  beliefs.reserve(k);
  for (int node = 0; node < k; ++node) {
    Belief b;
    b.j_hat = (ev[node].j + state.forward[node].j) + state.backward[node].j;
    b.j_hat = 0.5 * (b.j_hat + b.j_hat.transpose()).eval();
    b.h_hat = ev[node].h + state.forward[node].h + state.backward[node].h;
    Eigen::SelfAdjointEigenSolver<Matrix> es(b.j_hat, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(lmin > 1e-12 * lmax)) {
      std::ostringstream os;
      os << "belief precision at node " << node << " is not PD (lmin = "
         << lmin << ")";
      throw DegeneracyError(os.str(), node);
    }
    Eigen::LDLT<Matrix> ldlt(b.j_hat);
    b.mean = ldlt.solve(b.h_hat);
    Matrix cov = ldlt.solve(Matrix::Identity(n, n));
    b.covariance = 0.5 * (cov + cov.transpose());
    beliefs.push_back(std::move(b));
  }
  return beliefs;
}

RunResult run(const CyclicModel& model, const Evidence& ev,
              const BpConfig& config, Execution exec) {
  return run_impl(model, ev, /*cut_edge=*/-1, config, exec);
}

RunResult run_on_cut_loop(const CyclicModel& model, const Evidence& ev,
                          int cut_edge, const BpConfig& config, Execution exec) {
  if (cut_edge < 0 || cut_edge >= model.num_nodes) {
    std::ostringstream os;
    os << "run_on_cut_loop: cut edge " << cut_edge << " out of range [0, "
       << model.num_nodes << ")";
    throw std::invalid_argument(os.str());
  }
  return run_impl(model, ev, cut_edge, config, exec);
}

}  // namespace loopgbp::bp
