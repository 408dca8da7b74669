#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "loopgbp/bp.hpp"
#include "loopgbp/exact.hpp"
#include "loopgbp/rng.hpp"
#include "test_util.hpp"

using namespace loopgbp;
using bp::BpConfig;
using bp::BpState;
using bp::ConvergenceStatus;
using bp::Message;
using testutil::m1;
using testutil::same_bits;
using testutil::uniform_scalar_model;
using testutil::v1;
using testutil::zero_edge_model;
using testutil::zero_evidence;

namespace {

EdgePotential scalar_edge(double p11, double p12, double p22) {
  EdgePotential e;
  e.p11 = m1(p11);
  e.p12 = m1(p12);
  e.p22 = m1(p22);
  return e;
}

Message zero_msg(int n) {
  return Message{Matrix::Zero(n, n), Vector::Zero(n)};
}

EvidenceMessage ev_msg(double j, double h) {
  return EvidenceMessage{m1(j), v1(h)};
}

double belief_gap(const std::vector<bp::Belief>& a,
                  const std::vector<bp::Belief>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, (a[i].mean - b[i].mean).norm());
    worst = std::max(worst, (a[i].covariance - b[i].covariance).norm());
  }
  return worst;
}

}  // namespace

TEST_CASE("forward step on scalar hand values") {
  EdgePotential e = scalar_edge(1.0, -1.0, 2.0);

  // S = 1 + 1 + 0 = 2, j = 2 - 1/2, h = 0.
  Message out = bp::forward_step(e, ev_msg(1.0, 0.0), zero_msg(1));
  CHECK(out.j(0, 0) == 1.5);
  CHECK(out.h(0) == 0.0);

  // S = 1 + 1 + 1 = 3, j = 2 - 1/3, h = -(-1) * (2 + 1)/3 = 1.
  Message out2 = bp::forward_step(e, ev_msg(1.0, 2.0), Message{m1(1.0), v1(1.0)});
  CHECK(out2.j(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(out2.h(0) == doctest::Approx(1.0).epsilon(1e-15));

  // No coupling: the message carries no information beyond p22.
  Message flat = bp::forward_step(scalar_edge(1.0, 0.0, 2.0), ev_msg(1.0, 5.0),
                                  Message{m1(2.0), v1(3.0)});
  CHECK(flat.j(0, 0) == 2.0);
  CHECK(flat.h(0) == 0.0);
}

TEST_CASE("backward step mirrors the forward step on a symmetric edge") {
  EdgePotential sym = scalar_edge(1.0, -0.5, 1.0);
  EvidenceMessage ev = ev_msg(1.0, 2.0);
  Message in{m1(0.5), v1(-1.0)};
  Message f = bp::forward_step(sym, ev, in);
  Message b = bp::backward_step(sym, ev, in);
  CHECK(same_bits(f.j, b.j));
  CHECK(same_bits(f.h, b.h));

  EdgePotential skewed = scalar_edge(1.0, -1.0, 2.0);
  // Backward denominator uses p22: S = 2 + 1 = 3, j = 1 - 1/3.
  Message back = bp::backward_step(skewed, ev_msg(1.0, 0.0), zero_msg(1));
  CHECK(back.j(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("first parallel iteration on the scalar loop is the hand value") {
  CyclicModel model = uniform_scalar_model();
  Evidence ev = zero_evidence(model);
  auto msgs = evidence_messages(model, ev);
  BpConfig cfg;
  BpState state = bp::initial_state(model, cfg);
  BpState next = bp::parallel_iteration(model, msgs, state, cfg);

  // Every directed message sees S = 1 + 1 + 0 = 2 and the same scalar
  // recursion; the expected value is written exactly as the kernel computes.
  double expected = 1.0 - (-0.5) * ((-0.5) / 2.0);
  CHECK(expected == 0.875);
  for (int k = 0; k < 3; ++k) {
    CHECK(next.forward[k].j(0, 0) == expected);
    CHECK(next.backward[k].j(0, 0) == expected);
    CHECK(next.forward[k].h(0) == 0.0);
    CHECK(next.backward[k].h(0) == 0.0);
  }
  CHECK(next.iteration == 1);
}

TEST_CASE("messages of a symmetric loop stay equal across slots") {
  CyclicModel model = uniform_scalar_model();
  Evidence ev = zero_evidence(model);
  auto msgs = evidence_messages(model, ev);
  BpConfig cfg;
  BpState state = bp::initial_state(model, cfg);
  for (int it = 0; it < 5; ++it) {
    state = bp::parallel_iteration(model, msgs, state, cfg);
    for (int k = 0; k < 3; ++k) {
      CHECK(same_bits(state.forward[k].j, state.forward[0].j));
      CHECK(same_bits(state.backward[k].j, state.forward[0].j));
    }
  }
}

TEST_CASE("zero coupling converges in one committed iteration") {
  CyclicModel model = random_model(5, 2, 1, 0.0, 3);
  Evidence ev = zero_evidence(model);
  bp::RunResult res = bp::run(model, ev);
  CHECK(res.status == ConvergenceStatus::converged);
  CHECK(res.iterations == 1);
  CHECK(res.trace.size() == 1);

  // Decoupled model: BP equals the oracle exactly up to solver roundoff.
  oracle::ExactMarginals ex = oracle::exact_smooth(model, ev);
  for (int k = 0; k < 5; ++k) {
    CHECK((res.beliefs[k].mean - ex.means[k]).norm() < 1e-12);
    CHECK((res.beliefs[k].covariance - ex.covariances[k]).norm() < 1e-12);
  }
}

TEST_CASE("zero edge potentials leave the evidence posterior") {
  CyclicModel model = zero_edge_model(4);
  Evidence ev;
  ev.observations = {v1(1.0), v1(2.0), v1(-1.0), v1(3.0)};
  bp::RunResult res = bp::run(model, ev);
  CHECK(res.status == ConvergenceStatus::converged);
  CHECK(res.iterations == 0);
  CHECK(res.trace.empty());
  for (int k = 0; k < 4; ++k) {
    // mean = p11^-1 (-p12 y) with p11 = 2+k, p12 = -1; covariance = p11^-1.
    double d = 2.0 + k;
    CHECK(res.beliefs[k].mean(0) == ev.observations[k](0) / d);
    CHECK(res.beliefs[k].covariance(0, 0) == 1.0 / d);
  }
}

TEST_CASE("loopy beliefs have exact means and biased covariances") {
  CyclicModel model = random_model(6, 2, 2, 0.3, 42);
  Evidence ev = sample(model, 7, 1)[0].evidence;
  bp::RunResult res = bp::run(model, ev);
  REQUIRE(res.status == ConvergenceStatus::converged);
  oracle::ExactMarginals ex = oracle::exact_smooth(model, ev);

  double worst_mean = 0.0, worst_cov = 0.0;
  for (int k = 0; k < 6; ++k) {
    worst_mean = std::max(worst_mean, (res.beliefs[k].mean - ex.means[k]).norm() /
                                          (1.0 + ex.means[k].norm()));
    worst_cov = std::max(worst_cov,
                         (res.beliefs[k].covariance - ex.covariances[k]).norm() /
                             ex.covariances[k].norm());
  }
  CHECK(worst_mean <= 1e-6);
  // The single loop double-counts information, so covariances stay off.
  CHECK(worst_cov > 1e-6);
}

TEST_CASE("cutting the loop makes BP exact") {
  CyclicModel model = random_model(7, 2, 1, 0.45, 11);
  Evidence ev = sample(model, 8, 1)[0].evidence;
  int cut = 6;
  bp::RunResult res = bp::run_on_cut_loop(model, ev, cut);
  REQUIRE(res.status == ConvergenceStatus::converged);
  oracle::ExactMarginals ex = oracle::exact_smooth_cut(model, ev, cut);
  for (int k = 0; k < 7; ++k) {
    CHECK((res.beliefs[k].mean - ex.means[k]).norm() /
              (1.0 + ex.means[k].norm()) <=
          1e-8);
    CHECK((res.beliefs[k].covariance - ex.covariances[k]).norm() /
              ex.covariances[k].norm() <=
          1e-8);
  }
  CHECK_THROWS_AS(bp::run_on_cut_loop(model, ev, 7), std::invalid_argument);
  CHECK_THROWS_AS(bp::run_on_cut_loop(model, ev, -1), std::invalid_argument);
}

TEST_CASE("a cut 3-loop settles within the chain diameter") {
  CyclicModel model = uniform_scalar_model();
  Evidence ev;
  ev.observations = {v1(1.0), v1(-2.0), v1(0.5)};
  bp::RunResult res = bp::run_on_cut_loop(model, ev, 2);
  CHECK(res.status == ConvergenceStatus::converged);
  CHECK(res.iterations <= 2);
  CHECK(res.iterations >= 1);
}

TEST_CASE("cut and uncut beliefs agree as the cut edge decouples") {
  CyclicModel base = random_model(5, 1, 1, 0.5, 19);
  Evidence ev = sample(base, 4, 1)[0].evidence;
  int cut = 2;
  std::vector<double> gaps;
  for (double s : {0.4, 0.2, 0.1, 0.05}) {
    CyclicModel model = base;
    model.edges[cut].p11 *= s;
    model.edges[cut].p12 *= s;
    model.edges[cut].p22 *= s;
    require_valid(model);
    bp::RunResult full = bp::run(model, ev);
    bp::RunResult cutrun = bp::run_on_cut_loop(model, ev, cut);
    REQUIRE(full.status == ConvergenceStatus::converged);
    REQUIRE(cutrun.status == ConvergenceStatus::converged);
    gaps.push_back(belief_gap(full.beliefs, cutrun.beliefs));
  }
  for (size_t i = 1; i < gaps.size(); ++i) CHECK(gaps[i] < gaps[i - 1]);
  CHECK(gaps.back() < 0.25 * gaps.front());
}

TEST_CASE("converged state is a fixed point of the iteration") {
  CyclicModel model = random_model(6, 3, 2, 0.4, 23);
  Evidence ev = sample(model, 5, 1)[0].evidence;
  BpConfig cfg;
  cfg.tolerance = 1e-12;
  bp::RunResult res = bp::run(model, ev, cfg);
  REQUIRE(res.status == ConvergenceStatus::converged);

  auto msgs = evidence_messages(model, ev);
  BpState probe = bp::parallel_iteration(model, msgs, res.state, cfg);
  for (int k = 0; k < 6; ++k) {
    CHECK((probe.forward[k].j - res.state.forward[k].j).norm() /
              (1.0 + probe.forward[k].j.norm()) <=
          10.0 * cfg.tolerance);
    CHECK((probe.backward[k].h - res.state.backward[k].h).norm() /
              (1.0 + probe.backward[k].h.norm()) <=
          10.0 * cfg.tolerance);
  }
}

TEST_CASE("sweep schedule reaches the same fixed point") {
  CyclicModel model = random_model(5, 2, 1, 0.5, 29);
  Evidence ev = sample(model, 6, 1)[0].evidence;
  BpConfig cfg;
  bp::RunResult par = bp::run(model, ev, cfg);
  REQUIRE(par.status == ConvergenceStatus::converged);

  auto msgs = evidence_messages(model, ev);
  BpState state = bp::initial_state(model, cfg);
  for (int it = 0; it < 200; ++it) state = bp::sweep_iteration(model, msgs, state, cfg);
  auto swept = bp::beliefs_from_state(model, msgs, state);
  CHECK(belief_gap(par.beliefs, swept) <= 1e-8);
}

TEST_CASE("damping keeps the fixed point and matches the hand mix") {
  CyclicModel model = random_model(4, 2, 1, 0.45, 31);
  Evidence ev = sample(model, 9, 1)[0].evidence;

  BpConfig plain;
  BpConfig damped;
  damped.damping = 0.3;
  bp::RunResult a = bp::run(model, ev, plain);
  bp::RunResult b = bp::run(model, ev, damped);
  REQUIRE(a.status == ConvergenceStatus::converged);
  REQUIRE(b.status == ConvergenceStatus::converged);
  CHECK(belief_gap(a.beliefs, b.beliefs) <= 1e-8);

  // One damped update is exactly (1-g)*computed + g*previous.
  auto msgs = evidence_messages(model, ev);
  BpConfig half;
  half.damping = 0.5;
  BpState s0 = bp::initial_state(model, plain);
  BpState s1 = bp::parallel_iteration(model, msgs, s0, plain);
  BpState s2 = bp::parallel_iteration(model, msgs, s1, plain);
  BpState mixed = bp::parallel_iteration(model, msgs, s1, half);
  for (int k = 0; k < 4; ++k) {
    Matrix want = 0.5 * s2.forward[k].j + 0.5 * s1.forward[k].j;
    CHECK(same_bits(mixed.forward[k].j, want));
    Vector wanth = 0.5 * s2.backward[k].h + 0.5 * s1.backward[k].h;
    CHECK(same_bits(mixed.backward[k].h, wanth));
  }
}

TEST_CASE("initial precision only changes the path, not the answer") {
  CyclicModel model = random_model(5, 2, 1, 0.4, 37);
  Evidence ev = sample(model, 10, 1)[0].evidence;
  BpConfig plain;
  BpConfig seeded;
  seeded.init_precision = 0.01;
  bp::RunResult a = bp::run(model, ev, plain);
  bp::RunResult b = bp::run(model, ev, seeded);
  REQUIRE(a.status == ConvergenceStatus::converged);
  REQUIRE(b.status == ConvergenceStatus::converged);
  CHECK(belief_gap(a.beliefs, b.beliefs) <= 1e-8);

  BpState init = bp::initial_state(model, seeded);
  CHECK(init.forward[0].j(0, 0) == 0.01);
  CHECK(init.forward[0].j(0, 1) == 0.0);
}

TEST_CASE("trace rows cover exactly the committed iterations") {
  CyclicModel model = random_model(6, 2, 1, 0.35, 41);
  Evidence ev = sample(model, 11, 1)[0].evidence;
  bp::RunResult res = bp::run(model, ev);
  REQUIRE(res.status == ConvergenceStatus::converged);
  CHECK(int(res.trace.size()) == res.iterations);
  BpConfig cfg;
  for (size_t i = 0; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].iteration == int(i) + 1);
    CHECK(res.trace[i].j_frobenius.size() == 12);
    // A committed turn moved some message beyond tolerance in J or in h.
    CHECK(std::max(res.trace[i].max_delta_j, res.trace[i].max_delta_h) >
          cfg.tolerance);
  }
}

TEST_CASE("iteration budget is respected") {
  CyclicModel model = random_model(6, 2, 1, 0.5, 43);
  Evidence ev = sample(model, 12, 1)[0].evidence;
  BpConfig tight;
  tight.max_iterations = 2;
  bp::RunResult res = bp::run(model, ev, tight);
  CHECK(res.status == ConvergenceStatus::max_iterations);
  CHECK(res.iterations == 2);
  CHECK(res.trace.size() == 2);
  CHECK(res.beliefs.size() == 6);
}

TEST_CASE("config validation") {
  CyclicModel model = uniform_scalar_model();
  Evidence ev = zero_evidence(model);
  BpConfig bad;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(bp::run(model, ev, bad), std::invalid_argument);
  bad = BpConfig{};
  bad.damping = 1.0;
  CHECK_THROWS_AS(bp::run(model, ev, bad), std::invalid_argument);
  bad = BpConfig{};
  bad.max_iterations = 0;
  CHECK_THROWS_AS(bp::run(model, ev, bad), std::invalid_argument);
  bad = BpConfig{};
  bad.init_precision = -0.1;
  CHECK_THROWS_AS(bp::run(model, ev, bad), std::invalid_argument);
}

TEST_CASE("singular denominator reports the edge") {
  EdgePotential e = scalar_edge(-1.0, 0.5, 1.0);
  try {
    bp::forward_step(e, ev_msg(0.5, 0.0), zero_msg(1), 3);
    FAIL("expected SingularityError");
  } catch (const SingularityError& err) {
    CHECK(err.index == 3);
    CHECK(std::string(err.what()).find("edge 3") != std::string::npos);
  }
}

TEST_CASE("non-PD belief precision reports the node") {
  CyclicModel model = uniform_scalar_model();
  Evidence ev = zero_evidence(model);
  auto msgs = evidence_messages(model, ev);
  BpState state = bp::initial_state(model, BpConfig{});
  for (auto& msg : state.forward) msg.j = m1(-5.0);
  try {
    bp::beliefs_from_state(model, msgs, state);
    FAIL("expected DegeneracyError");
  } catch (const DegeneracyError& err) {
    CHECK(err.index == 0);
    CHECK(std::string(err.what()).find("node 0") != std::string::npos);
  }
}
