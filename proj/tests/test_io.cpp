#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "loopgbp/bp.hpp"
#include "loopgbp/io.hpp"
#include "test_util.hpp"

using namespace loopgbp;
using io::json;
using testutil::same_bits;
using testutil::uniform_scalar_model;
using testutil::v1;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "loopgbp_io_test";
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("matrices and vectors round trip bitwise") {
  Matrix m(2, 3);
  m << 0.1, -1.0 / 3.0, 2e-300, 1e300, 0.0, -7.25;
  Matrix back = io::matrix_from_json(io::matrix_to_json(m), "m");
  CHECK(same_bits(m, back));

  Vector v(3);
  v << 0.1, -2.5, 1e-17;
  CHECK(same_bits(v, io::vector_from_json(io::vector_to_json(v), "v")));
}

TEST_CASE("matrix parsing names the offending row") {
  json ragged = json::array({json::array({1.0, 2.0}), json::array({3.0})});
  CHECK_THROWS_WITH_AS(io::matrix_from_json(ragged, "block"),
                       doctest::Contains("row 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(io::matrix_from_json(json::array(), "block"),
                       doctest::Contains("nonempty"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(io::vector_from_json(json::object(), "vec"),
                       doctest::Contains("vec"), std::invalid_argument);
}

TEST_CASE("model and evidence round trip through files") {
  TempDir tmp;
  CyclicModel model = random_model(4, 2, 1, 0.4, 71);
  io::write_json_file(tmp.path / "model.json", io::model_to_json(model));
  CyclicModel back =
      io::model_from_json(io::read_json_file(tmp.path / "model.json"));
  CHECK(back.num_nodes == 4);
  CHECK(back.state_dim == 2);
  CHECK(back.obs_dim == 1);
  for (int i = 0; i < 4; ++i) {
    CHECK(same_bits(back.edges[i].p11, model.edges[i].p11));
    CHECK(same_bits(back.edges[i].p12, model.edges[i].p12));
    CHECK(same_bits(back.edges[i].p22, model.edges[i].p22));
    CHECK(same_bits(back.nodes[i].p12, model.nodes[i].p12));
  }

  Evidence ev = sample(model, 1, 1)[0].evidence;
  io::write_json_file(tmp.path / "ev.json", io::evidence_to_json(ev));
  Evidence eback =
      io::evidence_from_json(io::read_json_file(tmp.path / "ev.json"));
  REQUIRE(eback.observations.size() == 4);
  for (int i = 0; i < 4; ++i)
    CHECK(same_bits(eback.observations[i], ev.observations[i]));
}

TEST_CASE("missing fields are named") {
  json j;
  j["num_nodes"] = 3;
  CHECK_THROWS_WITH_AS(io::model_from_json(j),
                       doctest::Contains("missing field 'state_dim'"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(io::marginals_from_json(json::object()),
                       doctest::Contains("marginals"), std::invalid_argument);
}

TEST_CASE("marginal documents round trip and diff cleanly") {
  CyclicModel model = uniform_scalar_model();
  Evidence ev;
  ev.observations = {v1(1.0), v1(0.0), v1(-2.0)};
  bp::RunResult res = bp::run(model, ev);
  io::MarginalsDoc doc = io::from_beliefs(res.beliefs);

  io::MarginalsDoc back = io::marginals_from_json(io::marginals_to_json(doc));
  CHECK(back.num_nodes == 3);
  CHECK(back.state_dim == 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(same_bits(back.means[i], doc.means[i]));
    CHECK(same_bits(back.covariances[i], doc.covariances[i]));
  }

  io::CompareReport self = io::compare(doc, doc);
  CHECK(self.max_mean_error == 0.0);
  CHECK(self.max_cov_error == 0.0);
  REQUIRE(self.mean_errors.size() == 3);

  io::MarginalsDoc other = doc;
  other.num_nodes = 4;
  CHECK_THROWS_WITH_AS(io::compare(doc, other),
                       doctest::Contains("mismatched shapes"),
                       std::invalid_argument);

  json cj = io::compare_to_json(self);
  CHECK(cj["max_mean_rel_err"] == 0.0);
  CHECK(cj["nodes"].size() == 3);
}

TEST_CASE("read_json_file reports the file on a parse failure") {
  TempDir tmp;
  fs::path bad = tmp.path / "broken.json";
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_WITH_AS(io::read_json_file(bad), doctest::Contains("broken.json"),
                       std::invalid_argument);
  CHECK_THROWS_AS(io::read_json_file(tmp.path / "absent.json"),
                  std::runtime_error);
}

TEST_CASE("doubles print with full round-trip precision") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(-2.5) == "-2.5");
  CHECK(io::format_double(std::nan("")) == "nan");
}

TEST_CASE("csv writers emit the documented columns") {
  TempDir tmp;
  bp::DiagnosticsTrace trace;
  trace.push_back(bp::TraceRow{1, 0.5, 0.25, {1.0, 2.0}});
  trace.push_back(bp::TraceRow{2, 0.125, 0.1, {1.0, 2.0}});
  io::write_trace_csv(tmp.path / "trace.csv", trace);
  CHECK(slurp(tmp.path / "trace.csv") ==
        "iteration,max_delta_j,max_delta_h\n"
        "1,0.5,0.25\n"
        "2,0.125,0.10000000000000001\n");

  analysis::ContractionReport rep;
  rep.frobenius_deltas = {std::nan(""), 2.0};
  rep.hilbert_to_fixed_point = {std::nan(""), 0.0};
  io::write_fixed_point_csv(tmp.path / "fp.csv", rep);
  CHECK(slurp(tmp.path / "fp.csv") ==
        "iteration,frobenius_delta,hilbert_to_fixed_point\n"
        "0,nan,nan\n"
        "1,2,0\n");
}

TEST_CASE("json files end with a newline and sorted keys") {
  TempDir tmp;
  json j;
  j["zeta"] = 1;
  j["alpha"] = 2;
  io::write_json_file(tmp.path / "o.json", j);
  std::string text = slurp(tmp.path / "o.json");
  CHECK(text.back() == '\n');
  CHECK(text.find("alpha") < text.find("zeta"));
}
