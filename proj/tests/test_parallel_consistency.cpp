#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "loopgbp/bp.hpp"
#include "loopgbp/loop_map.hpp"
#include "test_util.hpp"

using namespace loopgbp;
using analysis::ComposedLoopMap;
using testutil::same_bits;
using testutil::zero_evidence;

namespace {

bool same_state(const bp::BpState& a, const bp::BpState& b) {
  for (size_t k = 0; k < a.forward.size(); ++k) {
    if (!same_bits(a.forward[k].j, b.forward[k].j)) return false;
    if (!same_bits(a.forward[k].h, b.forward[k].h)) return false;
    if (!same_bits(a.backward[k].j, b.backward[k].j)) return false;
    if (!same_bits(a.backward[k].h, b.backward[k].h)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("parallel iteration is execution-policy invariant") {
  CyclicModel model = random_model(32, 3, 2, 0.5, 101);
  Evidence ev = sample(model, 1, 1)[0].evidence;
  auto msgs = evidence_messages(model, ev);
  bp::BpConfig cfg;
  bp::BpState serial = bp::initial_state(model, cfg);
  bp::BpState omp = serial;
  for (int it = 0; it < 20; ++it) {
    serial = bp::parallel_iteration(model, msgs, serial, cfg, Execution::serial);
    omp = bp::parallel_iteration(model, msgs, omp, cfg, Execution::openmp);
    REQUIRE(same_state(serial, omp));
  }
}

TEST_CASE("full runs agree across execution policies and repeats") {
  CyclicModel model = random_model(12, 2, 1, 0.5, 103);
  Evidence ev = sample(model, 2, 1)[0].evidence;
  bp::RunResult a = bp::run(model, ev, {}, Execution::serial);
  bp::RunResult b = bp::run(model, ev, {}, Execution::openmp);
  bp::RunResult c = bp::run(model, ev, {}, Execution::openmp);

  CHECK(a.status == b.status);
  CHECK(a.iterations == b.iterations);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].max_delta_j == b.trace[i].max_delta_j);
    CHECK(a.trace[i].max_delta_h == b.trace[i].max_delta_h);
    CHECK(a.trace[i].j_frobenius == b.trace[i].j_frobenius);
  }
  REQUIRE(a.beliefs.size() == b.beliefs.size());
  for (size_t k = 0; k < a.beliefs.size(); ++k) {
    CHECK(same_bits(a.beliefs[k].mean, b.beliefs[k].mean));
    CHECK(same_bits(a.beliefs[k].covariance, b.beliefs[k].covariance));
    CHECK(same_bits(b.beliefs[k].mean, c.beliefs[k].mean));
  }
  CHECK(same_state(a.state, b.state));
  CHECK(same_state(b.state, c.state));
}

TEST_CASE("analysis batch kernels are execution-policy invariant") {
  CyclicModel model = random_model(8, 3, 2, 0.5, 107);
  Evidence ev = zero_evidence(model);
  ComposedLoopMap map = analysis::extract_maps(model, evidence_messages(model, ev));

  analysis::MonotonicityReport ms =
      analysis::check_monotone(map, 500, 11, Execution::serial);
  analysis::MonotonicityReport mo =
      analysis::check_monotone(map, 500, 11, Execution::openmp);
  CHECK(ms.passes == mo.passes);
  CHECK(ms.worst_margin == mo.worst_margin);

  Matrix j = Matrix::Identity(3, 3);
  analysis::DerivativeCheckReport ds =
      analysis::differential_positivity_check(map.stages[0], j, 300, 13,
                                              Execution::serial);
  analysis::DerivativeCheckReport dso =
      analysis::differential_positivity_check(map.stages[0], j, 300, 13,
                                              Execution::openmp);
  CHECK(ds.derivative_passes == dso.derivative_passes);
  CHECK(ds.cone_passes == dso.cone_passes);
  CHECK(ds.max_derivative_error == dso.max_derivative_error);
  CHECK(ds.max_derivative_ratio == dso.max_derivative_ratio);
  CHECK(ds.min_direction_eigenvalue == dso.min_direction_eigenvalue);

  analysis::TrajectoryPositivityReport ts = analysis::trajectory_positivity(
      map, Matrix::Zero(3, 3), 200, 17, Execution::serial);
  analysis::TrajectoryPositivityReport to = analysis::trajectory_positivity(
      map, Matrix::Zero(3, 3), 200, 17, Execution::openmp);
  CHECK(ts.passes == to.passes);
  CHECK(ts.min_eigenvalue == to.min_eigenvalue);
  CHECK(ts.trajectory_length == to.trajectory_length);

  analysis::ContractionReport cs =
      analysis::contraction_diagnostics(map, 200, 19, Execution::serial);
  analysis::ContractionReport co =
      analysis::contraction_diagnostics(map, 200, 19, Execution::openmp);
  CHECK(cs.max_ratio == co.max_ratio);
  CHECK(cs.mean_ratio == co.mean_ratio);
  CHECK(cs.degenerate_count == co.degenerate_count);
  CHECK(cs.skipped_count == co.skipped_count);
  REQUIRE(cs.pairs.size() == co.pairs.size());
  for (size_t p = 0; p < cs.pairs.size(); ++p) {
    CHECK(cs.pairs[p].dist_before == co.pairs[p].dist_before);
    CHECK(cs.pairs[p].dist_after == co.pairs[p].dist_after);
    CHECK(cs.pairs[p].ratio == co.pairs[p].ratio);
  }

  // Repeat with the same seed: bit-for-bit reproducible.
  analysis::ContractionReport again =
      analysis::contraction_diagnostics(map, 200, 19, Execution::openmp);
  CHECK(again.max_ratio == co.max_ratio);
  CHECK(again.mean_ratio == co.mean_ratio);
}
