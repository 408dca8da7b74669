#pragma once

// Convergence analysis of the message-precision recursion. Each directed
// edge induces the map psi(J) = a - b (c + J)^-1 b^T on the PSD cone; going
// once around the loop composes the K stages. The checks here probe the
// properties that explain why the recursion settles: Loewner-order
// monotonicity, PSD-preservation of the linearization, and contraction
// behaviour in the Hilbert projective metric.

#include <cstdint>
#include <functional>
#include <vector>

#include "loopgbp/cone_geometry.hpp"
#include "loopgbp/model.hpp"

namespace loopgbp::analysis {

// psi(J) = a - b (c + J)^-1 b^T
struct PrecisionMap {
  Matrix a;
  Matrix b;
  Matrix c;
};

// Stage i is the map of edge (i, i+1 mod K); applying all stages
// left-to-right advances the clockwise message precision once around the
// loop and back to the starting edge.
struct ComposedLoopMap {
  std::vector<PrecisionMap> stages;
};

ComposedLoopMap extract_maps(const CyclicModel& model,
                             const std::vector<EvidenceMessage>& ev);

// Symmetrized map application; stage_index only labels errors.
Matrix apply_map(const PrecisionMap& map, const Matrix& j, int stage_index = -1);
Matrix apply_composed(const ComposedLoopMap& map, const Matrix& j);

// Deliberately order-reversing variant a + b (c + J)^-1 b^T. Exists so the
// order checks can demonstrate they catch a broken composition.
Matrix apply_map_sign_flipped(const PrecisionMap& map, const Matrix& j);

// Linearization d/dt psi(J + t*Delta) = b (c+J)^-1 Delta (c+J)^-1 b^T, a
// congruence, and its chain-rule composition through all stages.
Matrix derivative(const PrecisionMap& map, const Matrix& j, const Matrix& delta);
Matrix composed_derivative(const ComposedLoopMap& map, const Matrix& j,
                           const Matrix& delta);

// Shared report for the fixed-point iteration and the pairwise contraction
// probe; each op fills the fields it produces.
struct PairSample {
  int index = -1;
  double dist_before = 0.0;
  double dist_after = 0.0;
  double ratio = 0.0;
  bool degenerate = false;  // dist_before at the floating-point floor
  bool skipped = false;     // an image failed the PD check
};

struct ContractionReport {
  // iterate_to_fixed_point: trajectory data. Entry t describes iterate t;
  // frobenius_deltas[t] = ||J^t - J^(t-1)||_F (NaN at t = 0) and
  // hilbert_to_fixed_point[t] = d_H(J^t, J*) (NaN when either is not PD).
  std::vector<double> frobenius_deltas;
  std::vector<double> hilbert_to_fixed_point;
  Matrix fixed_point;
  bool converged = false;
  int iterations_to_converge = 0;  // committed (state-changing) applications
  double residual = 0.0;           // ||Psi(J*) - J*||_F at the final iterate

  // contraction_diagnostics: pairwise ratios d(Psi X, Psi Y)/d(X, Y).
  std::vector<PairSample> pairs;
  int degenerate_count = 0;
  int skipped_count = 0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
};

// Iterates J <- Psi(J) from j0 (PSD) until
// ||J^(t+1) - J^(t)||_F <= tol * (1 + ||J^(t)||_F) or max_iterations.
ContractionReport iterate_to_fixed_point(const ComposedLoopMap& map,
                                         const Matrix& j0, double tol,
                                         int max_iterations);

struct MonotonicityReport {
  int trials = 0;
  int passes = 0;
  // min over trials of lmin(map(J + Delta) - map(J)); negative beyond the
  // order tolerance means a violation.
  double worst_margin = 0.0;
};

// Order-preservation probe: J2 = J1 + Delta with Delta PSD must map to
// map(J1) <= map(J2) within tolerance 1e-9. The std::function overload lets
// tests aim the same machinery at a corrupted map.
MonotonicityReport check_monotone(const std::function<Matrix(const Matrix&)>& map,
                                  int dim, int trials, std::uint64_t seed,
                                  Execution exec = Execution::openmp);
MonotonicityReport check_monotone(const PrecisionMap& map, int trials,
                                  std::uint64_t seed,
                                  Execution exec = Execution::openmp);
MonotonicityReport check_monotone(const ComposedLoopMap& map, int trials,
                                  std::uint64_t seed,
                                  Execution exec = Execution::openmp);

struct DerivativeCheckReport {
  int trials = 0;
  // (i) analytic derivative vs central finite differences at eps = 1e-5,
  // per-trial tolerance 5*eps*||Delta||_F^2*kappa with kappa the curvature
  // scale ||b||^2 ||(c+j)^-1||^3.
  int derivative_passes = 0;
  double max_derivative_error = 0.0;
  double max_derivative_ratio = 0.0;  // worst error / tolerance
  // (ii) PSD directions must stay PSD: lmin(Dpsi[Delta]) >= -1e-10.
  int cone_passes = 0;
  double min_direction_eigenvalue = 0.0;
};

DerivativeCheckReport differential_positivity_check(const PrecisionMap& map,
                                                    const Matrix& j, int trials,
                                                    std::uint64_t seed,
                                                    Execution exec = Execution::openmp);

// Walks a fixed-point trajectory of the composed map and checks, stage by
// stage at the actual stage inputs, that the linearization keeps random PSD
// directions PSD. `directions` are spread round-robin over the trajectory.
struct TrajectoryPositivityReport {
  int checks = 0;
  int passes = 0;
  double min_eigenvalue = 0.0;
  int trajectory_length = 0;
};

TrajectoryPositivityReport trajectory_positivity(const ComposedLoopMap& map,
                                                 const Matrix& j0, int directions,
                                                 std::uint64_t seed,
                                                 Execution exec = Execution::openmp);

// Random-PD-pair contraction probe of the composed map. Pairs whose Hilbert
// distance sits at the floating-point floor are reported degenerate and
// excluded from the ratio statistics; pairs with non-PD images are skipped.
ContractionReport contraction_diagnostics(const ComposedLoopMap& map, int pairs,
                                          std::uint64_t seed,
                                          Execution exec = Execution::openmp);

// Normalized power iteration on an entrywise-positive matrix, stopping when
// successive normalized iterates are within tol in the orthant Hilbert
// metric. distance_trace[t] = d_H(x^(t), v_f) against the final vector.
struct PerronResult {
  Vector vector;  // unit 2-norm, positive entries
  std::vector<double> distance_trace;
  int iterations = 0;
  bool converged = false;
};

PerronResult perron_iterate(const Matrix& a, const Vector& x0, double tol,
                            int max_iterations = 10000);

}  // namespace loopgbp::analysis
