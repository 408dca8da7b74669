#pragma once

// Dense ground-truth smoother: assembles the full joint information form and
// solves it directly. Serves as the oracle BP results are measured against.

#include "loopgbp/model.hpp"

namespace loopgbp::oracle {

struct ExactMarginals {
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

// Posterior mean and per-node covariance blocks of the full joint.
// Solver residual is held to ||J mu - h|| <= 1e-10 * (1 + ||h||).
ExactMarginals exact_smooth(const CyclicModel& model, const Evidence& ev);

// Ground truth for the loop with edge cut_edge removed.
ExactMarginals exact_smooth_cut(const CyclicModel& model, const Evidence& ev,
                                int cut_edge);

}  // namespace loopgbp::oracle
