// Compares wall time of the OpenMP kernels against the serial reference and
// verifies the two produce bitwise-identical results.

#include <chrono>
#include <cstdio>
#include <cstring>

#include <CLI11.hpp>
#include <omp.h>

#include "loopgbp/bp.hpp"
#include "loopgbp/loop_map.hpp"
#include "loopgbp/model.hpp"
#include "loopgbp/rng.hpp"

using namespace loopgbp;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool bitwise_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool bitwise_equal(const bp::BpState& a, const bp::BpState& b) {
  for (size_t k = 0; k < a.forward.size(); ++k) {
    if (!bitwise_equal(a.forward[k].j, b.forward[k].j)) return false;
    if (!bitwise_equal(a.forward[k].h, b.forward[k].h)) return false;
    if (!bitwise_equal(a.backward[k].j, b.backward[k].j)) return false;
    if (!bitwise_equal(a.backward[k].h, b.backward[k].h)) return false;
  }
  return true;
}

int report(const char* name, double serial_ms, double omp_ms, bool equal) {
  std::printf("%-24s serial %8.1f ms   openmp %8.1f ms   speedup %5.2fx   %s\n",
              name, serial_ms, omp_ms, serial_ms / omp_ms,
              equal ? "bitwise-identical" : "MISMATCH");
  return equal ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  int num_nodes = 256;
  int iters = 200;
  int trials = 4000;
  int pairs = 1000;
  std::uint64_t seed = 42;
  CLI::App app{"serial vs OpenMP benchmark"};
  app.add_option("--nodes", num_nodes, "loop length for the BP benchmark");
  app.add_option("--iters", iters, "BP iterations to time");
  app.add_option("--trials", trials, "monotonicity trials");
  app.add_option("--pairs", pairs, "contraction pairs");
  app.add_option("--seed", seed, "model seed");
  CLI11_PARSE(app, argc, argv);

  std::printf("omp_get_max_threads() = %d\n\n", omp_get_max_threads());

  CyclicModel model = random_model(num_nodes, 3, 2, 0.4, seed);
  Evidence ev = sample(model, derive_seed(seed, 1), 1).front().evidence;
  std::vector<EvidenceMessage> evm = evidence_messages(model, ev);
  bp::BpConfig config;
  int failures = 0;

  {
    bp::BpState serial_state = bp::initial_state(model, config);
    auto t0 = std::chrono::steady_clock::now();
    for (int t = 0; t < iters; ++t)
      serial_state = bp::parallel_iteration(model, evm, serial_state, config,
                                            Execution::serial);
    double serial_ms = ms_since(t0);

    bp::BpState omp_state = bp::initial_state(model, config);
    t0 = std::chrono::steady_clock::now();
    for (int t = 0; t < iters; ++t)
      omp_state = bp::parallel_iteration(model, evm, omp_state, config,
                                         Execution::openmp);
    double omp_ms = ms_since(t0);
    failures += report("parallel_iteration", serial_ms, omp_ms,
                       bitwise_equal(serial_state, omp_state));
  }

  analysis::ComposedLoopMap map = analysis::extract_maps(model, evm);
  {
    auto t0 = std::chrono::steady_clock::now();
    analysis::MonotonicityReport serial_rep = analysis::check_monotone(
        map, trials, derive_seed(seed, 2), Execution::serial);
    double serial_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    analysis::MonotonicityReport omp_rep = analysis::check_monotone(
        map, trials, derive_seed(seed, 2), Execution::openmp);
    double omp_ms = ms_since(t0);
    bool equal = serial_rep.trials == omp_rep.trials &&
                 serial_rep.passes == omp_rep.passes &&
                 std::memcmp(&serial_rep.worst_margin, &omp_rep.worst_margin,
                             sizeof(double)) == 0;
    failures += report("check_monotone", serial_ms, omp_ms, equal);
  }

  {
    auto t0 = std::chrono::steady_clock::now();
    analysis::ContractionReport serial_rep = analysis::contraction_diagnostics(
        map, pairs, derive_seed(seed, 3), Execution::serial);
    double serial_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    analysis::ContractionReport omp_rep = analysis::contraction_diagnostics(
        map, pairs, derive_seed(seed, 3), Execution::openmp);
    double omp_ms = ms_since(t0);
    bool equal = serial_rep.pairs.size() == omp_rep.pairs.size() &&
                 std::memcmp(&serial_rep.max_ratio, &omp_rep.max_ratio,
                             sizeof(double)) == 0 &&
                 std::memcmp(&serial_rep.mean_ratio, &omp_rep.mean_ratio,
                             sizeof(double)) == 0;
    for (size_t i = 0; equal && i < serial_rep.pairs.size(); ++i)
      equal = std::memcmp(&serial_rep.pairs[i].ratio, &omp_rep.pairs[i].ratio,
                          sizeof(double)) == 0;
    failures += report("contraction_diagnostics", serial_ms, omp_ms, equal);
  }

  return failures;
}
