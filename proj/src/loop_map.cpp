#include "loopgbp/loop_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "loopgbp/rng.hpp"
#include "schur_kernel.hpp"

namespace loopgbp::analysis {

namespace {

constexpr double kOrderTolerance = 1e-9;   // Loewner-order slack for trials
constexpr double kConeTolerance = 1e-10;   // PSD floor for linearized images
constexpr double kFdEpsilon = 1e-5;        // central-difference step
constexpr double kDegenerateDistance = 1e-13;

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

bool pd_quiet(const Matrix& x) {
  if (!is_symmetric(x)) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(x, Eigen::EigenvaluesOnly);
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() > 1e-12 * lmax;
}

void check_map(const PrecisionMap& map, int stage_index) {
  Eigen::Index n = map.a.rows();
  if (map.a.cols() != n || map.b.rows() != n || map.b.cols() != n ||
      map.c.rows() != n || map.c.cols() != n) {
    std::ostringstream os;
    os << "precision map";
    if (stage_index >= 0) os << " at stage " << stage_index;
    os << ": blocks must all be square of one size";
    throw std::invalid_argument(os.str());
  }
}

void check_input(const PrecisionMap& map, const Matrix& j, int stage_index) {
  check_map(map, stage_index);
  if (j.rows() != map.a.rows() || j.cols() != map.a.cols()) {
    std::ostringstream os;
    os << "precision map";
    if (stage_index >= 0) os << " at stage " << stage_index;
    os << ": input is " << j.rows() << "x" << j.cols() << ", expected "
       << map.a.rows() << "x" << map.a.cols();
    throw std::invalid_argument(os.str());
  }
}

int composed_dim(const ComposedLoopMap& map) {
  if (map.stages.empty())
    throw std::invalid_argument("composed map has no stages");
  return int(map.stages.front().a.rows());
}

// Spectral norm of a general (not necessarily symmetric) matrix.
double spectral_norm(const Matrix& m) {
  Matrix g = m.transpose() * m;
  g = 0.5 * (g + g.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

Matrix random_scaled_pd(int dim, std::mt19937_64& eng) {
  Matrix j = random_pd(dim, eng);
  std::uniform_real_distribution<double> logscale(std::log(0.2), std::log(5.0));
  return std::exp(logscale(eng)) * j;
}

// Deterministic batch runner: per-trial seeds are derived up front and the
// reduction happens serially afterwards, so scheduling cannot change results.
template <class Body>
void run_batch(int trials, Execution exec, const Body& body) {
  std::vector<char> failed(std::max(trials, 1), 0);
  std::vector<std::string> errors(std::max(trials, 1));
  bool use_omp = exec == Execution::openmp;
#pragma omp parallel for schedule(static) if (use_omp)
  for (int t = 0; t < trials; ++t) {
    try {
      body(t);
    } catch (const std::exception& err) {
      failed[t] = 1;
      errors[t] = err.what();
    }
  }
  for (int t = 0; t < trials; ++t)
    if (failed[t]) throw std::runtime_error(errors[t]);
}

}  // namespace

ComposedLoopMap extract_maps(const CyclicModel& model,
                             const std::vector<EvidenceMessage>& ev) {
  if (int(ev.size()) != model.num_nodes)
    throw std::invalid_argument("extract_maps: evidence message count does not match the model");
  ComposedLoopMap out;
  out.stages.reserve(model.num_nodes);
  for (int i = 0; i < model.num_nodes; ++i) {
    PrecisionMap stage;
    stage.a = model.edges[i].p22;
    stage.b = model.edges[i].p12.transpose();
    stage.c = model.edges[i].p11 + ev[i].j;
    out.stages.push_back(std::move(stage));
  }
  return out;
}

Matrix apply_map(const PrecisionMap& map, const Matrix& j, int stage_index) {
  check_input(map, j, stage_index);
  Matrix s = map.c + j;
  detail::SpdSolver solver(s, "precision map at stage", stage_index);
  return detail::schur_complement(map.a, map.b, solver);
}

Matrix apply_map_sign_flipped(const PrecisionMap& map, const Matrix& j) {
  check_input(map, j, -1);
  Matrix s = map.c + j;
  detail::SpdSolver solver(s, "sign-flipped precision map", -1);
  Matrix r = map.a + map.b * solver.solve(map.b.transpose());
  return 0.5 * (r + r.transpose());
}

Matrix apply_composed(const ComposedLoopMap& map, const Matrix& j) {
  composed_dim(map);
  Matrix cur = j;
  for (size_t i = 0; i < map.stages.size(); ++i)
    cur = apply_map(map.stages[i], cur, int(i));
  return cur;
}

Matrix derivative(const PrecisionMap& map, const Matrix& j, const Matrix& delta) {
  check_input(map, j, -1);
  if (delta.rows() != j.rows() || delta.cols() != j.cols())
    throw std::invalid_argument("derivative: direction dimension mismatch");
  Matrix s = map.c + j;
  detail::SpdSolver solver(s, "precision map derivative", -1);
  // b (c+J)^-1 Delta (c+J)^-1 b^T written as a congruence Y^T Delta Y so a
  // PSD direction stays PSD down to rounding.
  Matrix y = solver.solve(map.b.transpose());
  Matrix d = y.transpose() * delta * y;
  return 0.5 * (d + d.transpose());
}

Matrix composed_derivative(const ComposedLoopMap& map, const Matrix& j,
                           const Matrix& delta) {
  composed_dim(map);
  Matrix cur_j = j;
  Matrix cur_d = delta;
  for (size_t i = 0; i < map.stages.size(); ++i) {
    cur_d = derivative(map.stages[i], cur_j, cur_d);
    cur_j = apply_map(map.stages[i], cur_j, int(i));
  }
  return cur_d;
}

ContractionReport iterate_to_fixed_point(const ComposedLoopMap& map,
                                         const Matrix& j0, double tol,
                                         int max_iterations) {
  int dim = composed_dim(map);
  if (j0.rows() != dim || j0.cols() != dim)
    throw std::invalid_argument("iterate_to_fixed_point: j0 dimension mismatch");
  require_symmetric(j0, "iterate_to_fixed_point: j0");
  if (min_eigenvalue(j0) < -1e-10 * (1.0 + j0.norm()))
    throw std::domain_error("iterate_to_fixed_point: j0 is not PSD");
  if (!(tol > 0.0) || max_iterations < 1)
    throw std::invalid_argument("iterate_to_fixed_point: bad tolerance or iteration budget");

  ContractionReport report;
  std::vector<Matrix> iterates;
  iterates.push_back(0.5 * (j0 + j0.transpose()));
  report.frobenius_deltas.push_back(nan_value());

  Matrix cur = iterates.back();
  int committed = 0;
  for (int turn = 1; turn <= max_iterations; ++turn) {
    Matrix next = apply_composed(map, cur);
    double delta = (next - cur).norm();
    if (delta <= tol * (1.0 + cur.norm())) {
      report.converged = true;
      report.residual = delta;
      break;
    }
    cur = next;
    committed = turn;
    iterates.push_back(cur);
    report.frobenius_deltas.push_back(delta);
    if (turn == max_iterations) {
      // Budget exhausted; report the residual of the last application.
      report.residual = delta;
    }
  }
  report.iterations_to_converge = committed;
  report.fixed_point = cur;

  bool fixed_pd = pd_quiet(cur);
  report.hilbert_to_fixed_point.reserve(iterates.size());
  for (const Matrix& it : iterates) {
    if (fixed_pd && pd_quiet(it))
      report.hilbert_to_fixed_point.push_back(hilbert_dist_psd(it, cur));
    else
      report.hilbert_to_fixed_point.push_back(nan_value());
  }
  return report;
}

MonotonicityReport check_monotone(const std::function<Matrix(const Matrix&)>& map,
                                  int dim, int trials, std::uint64_t seed,
                                  Execution exec) {
  if (dim < 1 || trials < 1)
    throw std::invalid_argument("check_monotone: dim and trials must be positive");
  std::vector<double> margins(trials, 0.0);
  run_batch(trials, exec, [&](int t) {
    std::mt19937_64 eng(derive_seed(seed, std::uint64_t(t)));
    Matrix j1 = random_scaled_pd(dim, eng);
    Matrix delta = random_psd(dim, eng);
    Matrix lo = map(j1);
    Matrix hi = map(j1 + delta);
    margins[t] = min_eigenvalue(hi - lo);
  });
  MonotonicityReport report;
  report.trials = trials;
  report.worst_margin = *std::min_element(margins.begin(), margins.end());
  for (double m : margins)
    if (m >= -kOrderTolerance) ++report.passes;
  return report;
}

MonotonicityReport check_monotone(const PrecisionMap& map, int trials,
                                  std::uint64_t seed, Execution exec) {
  check_map(map, -1);
  return check_monotone(
      [&map](const Matrix& j) { return apply_map(map, j); },
      int(map.a.rows()), trials, seed, exec);
}

MonotonicityReport check_monotone(const ComposedLoopMap& map, int trials,
                                  std::uint64_t seed, Execution exec) {
  int dim = composed_dim(map);
  return check_monotone(
      [&map](const Matrix& j) { return apply_composed(map, j); },
      dim, trials, seed, exec);
}

DerivativeCheckReport differential_positivity_check(const PrecisionMap& map,
                                                    const Matrix& j, int trials,
                                                    std::uint64_t seed,
                                                    Execution exec) {
  check_input(map, j, -1);
  require_positive_definite(j, "differential_positivity_check: j");
  if (trials < 1)
    throw std::invalid_argument("differential_positivity_check: trials must be positive");

  // Curvature scale of psi at j; the second-order remainder of a finite
  // difference is bounded by ||b||^2 ||(c+j)^-1||^3 ||Delta||^2 * eps.
  Matrix s = map.c + j;
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  double s_lmin = es.eigenvalues().minCoeff();
  if (!(s_lmin > 0.0))
    throw std::domain_error("differential_positivity_check: c + j is not PD");
  double b_norm = spectral_norm(map.b);
  double kappa = b_norm * b_norm / (s_lmin * s_lmin * s_lmin);

  int dim = int(map.a.rows());
  std::vector<double> errors(trials), tolerances(trials), lmins(trials);
  run_batch(trials, exec, [&](int t) {
    std::mt19937_64 eng(derive_seed(seed, std::uint64_t(t)));
    Matrix delta = random_psd(dim, eng);
    Matrix analytic = derivative(map, j, delta);
    Matrix fd = (apply_map(map, j + kFdEpsilon * delta) -
                 apply_map(map, j - kFdEpsilon * delta)) /
                (2.0 * kFdEpsilon);
    errors[t] = (analytic - fd).norm();
    double dn = delta.norm();
    tolerances[t] = 5.0 * kFdEpsilon * dn * dn * kappa;
    lmins[t] = min_eigenvalue(analytic);
  });

  DerivativeCheckReport report;
  report.trials = trials;
  report.min_direction_eigenvalue = *std::min_element(lmins.begin(), lmins.end());
  for (int t = 0; t < trials; ++t) {
    if (errors[t] <= tolerances[t]) ++report.derivative_passes;
    report.max_derivative_error = std::max(report.max_derivative_error, errors[t]);
    if (tolerances[t] > 0.0)
      report.max_derivative_ratio =
          std::max(report.max_derivative_ratio, errors[t] / tolerances[t]);
    if (lmins[t] >= -kConeTolerance) ++report.cone_passes;
  }
  return report;
}

TrajectoryPositivityReport trajectory_positivity(const ComposedLoopMap& map,
                                                 const Matrix& j0, int directions,
                                                 std::uint64_t seed,
                                                 Execution exec) {
  int dim = composed_dim(map);
  if (directions < 1)
    throw std::invalid_argument("trajectory_positivity: directions must be positive");

  // Trajectory of the composed iteration, then every stage input visited
  // while traversing each iterate once around the loop.
  ContractionReport fp = iterate_to_fixed_point(map, j0, 1e-12, 1000);
  std::vector<Matrix> iterates;
  Matrix cur = 0.5 * (j0 + j0.transpose());
  iterates.push_back(cur);
  for (int t = 0; t < fp.iterations_to_converge; ++t) {
    cur = apply_composed(map, cur);
    iterates.push_back(cur);
  }

  std::vector<const PrecisionMap*> stage_of;
  std::vector<Matrix> input_of;
  for (const Matrix& it : iterates) {
    Matrix walk = it;
    for (const PrecisionMap& stage : map.stages) {
      stage_of.push_back(&stage);
      input_of.push_back(walk);
      walk = apply_map(stage, walk);
    }
  }

  int sites = int(input_of.size());
  std::vector<double> lmins(directions, 0.0);
  run_batch(directions, exec, [&](int d) {
    std::mt19937_64 eng(derive_seed(seed, std::uint64_t(d)));
    Matrix delta = random_psd(dim, eng);
    int site = d % sites;
    Matrix image = derivative(*stage_of[site], input_of[site], delta);
    lmins[d] = min_eigenvalue(image);
  });

  TrajectoryPositivityReport report;
  report.checks = directions;
  report.trajectory_length = int(iterates.size());
  report.min_eigenvalue = *std::min_element(lmins.begin(), lmins.end());
  for (double v : lmins)
    if (v >= -kConeTolerance) ++report.passes;
  return report;
}

ContractionReport contraction_diagnostics(const ComposedLoopMap& map, int pairs,
                                          std::uint64_t seed, Execution exec) {
  int dim = composed_dim(map);
  if (pairs < 1)
    throw std::invalid_argument("contraction_diagnostics: pairs must be positive");

  ContractionReport report;
  report.pairs.assign(pairs, PairSample{});
  run_batch(pairs, exec, [&](int p) {
    std::mt19937_64 eng(derive_seed(seed, std::uint64_t(p)));
    PairSample& sample = report.pairs[p];
    sample.index = p;
    Matrix x = random_scaled_pd(dim, eng);
    Matrix y = random_scaled_pd(dim, eng);
    sample.dist_before = hilbert_dist_psd(x, y);
    Matrix px = apply_composed(map, x);
    Matrix py = apply_composed(map, y);
    if (!pd_quiet(px) || !pd_quiet(py)) {
      sample.skipped = true;
      return;
    }
    sample.dist_after = hilbert_dist_psd(px, py);
    if (sample.dist_before <= kDegenerateDistance) {
      sample.degenerate = true;
      return;
    }
    sample.ratio = sample.dist_after / sample.dist_before;
  });

  double sum = 0.0;
  int used = 0;
  for (const PairSample& sample : report.pairs) {
    if (sample.skipped) {
      ++report.skipped_count;
    } else if (sample.degenerate) {
      ++report.degenerate_count;
    } else {
      ++used;
      sum += sample.ratio;
      report.max_ratio = std::max(report.max_ratio, sample.ratio);
    }
  }
  report.mean_ratio = used ? sum / used : 0.0;
  return report;
}

PerronResult perron_iterate(const Matrix& a, const Vector& x0, double tol,
                            int max_iterations) {
  if (a.rows() < 1 || a.rows() != a.cols())
    throw std::invalid_argument("perron_iterate: matrix must be square and nonempty");
  if (x0.size() != a.rows())
    throw std::invalid_argument("perron_iterate: start vector length mismatch");
  if ((a.array() <= 0.0).any())
    throw std::domain_error("perron_iterate: matrix must be entrywise positive");
  if ((x0.array() <= 0.0).any())
    throw std::domain_error("perron_iterate: start vector must be entrywise positive");
  if (!(tol > 0.0) || max_iterations < 1)
    throw std::invalid_argument("perron_iterate: bad tolerance or iteration budget");

  std::vector<Vector> iterates;
  Vector x = x0 / x0.norm();
  iterates.push_back(x);

  PerronResult result;
  int committed = 0;
  for (int turn = 1; turn <= max_iterations; ++turn) {
    Vector y = a * x;
    Vector next = y / y.norm();
    double d = hilbert_dist_orthant(next, x);
    if (d <= tol) {
      result.converged = true;
      x = next;
      break;
    }
    x = next;
    committed = turn;
    iterates.push_back(x);
  }
  result.iterations = committed;
  result.vector = x;
  result.distance_trace.reserve(iterates.size());
  for (const Vector& it : iterates)
    result.distance_trace.push_back(hilbert_dist_orthant(it, x));
  return result;
}

}  // namespace loopgbp::analysis
