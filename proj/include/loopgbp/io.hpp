#pragma once

// JSON/CSV serialization shared by the library tests and the CLI. All float
// output is deterministic: JSON uses shortest round-trip formatting, CSV is
// printed with 17 significant digits.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "loopgbp/bp.hpp"
#include "loopgbp/exact.hpp"
#include "loopgbp/loop_map.hpp"
#include "loopgbp/model.hpp"

namespace loopgbp::io {

using json = nlohmann::json;

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const char* what);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const char* what);

json model_to_json(const CyclicModel& model);
CyclicModel model_from_json(const json& j);

json evidence_to_json(const Evidence& ev);
Evidence evidence_from_json(const json& j);

// beliefs.json and exact.json share this document shape so any pair of them
// can be diffed: {num_nodes, state_dim, nodes: [{mean, covariance}, ...]}.
struct MarginalsDoc {
  int num_nodes = 0;
  int state_dim = 0;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

MarginalsDoc from_beliefs(const std::vector<bp::Belief>& beliefs);
MarginalsDoc from_exact(const oracle::ExactMarginals& marginals);
json marginals_to_json(const MarginalsDoc& doc);
MarginalsDoc marginals_from_json(const json& j);

// Per-node relative errors between two marginal documents.
// mean:       ||mu_a - mu_b|| / (1 + ||mu_b||)
// covariance: ||S_a - S_b||_F / ||S_b||_F   (second argument is reference)
struct CompareReport {
  std::vector<double> mean_errors;
  std::vector<double> cov_errors;
  double max_mean_error = 0.0;
  double max_cov_error = 0.0;
};

CompareReport compare(const MarginalsDoc& got, const MarginalsDoc& reference);
json compare_to_json(const CompareReport& report);

json sample_to_json(const PathSample& draw);

// File helpers. read_json_file wraps parse failures with the file name and
// the parser's position report.
void write_json_file(const std::filesystem::path& path, const json& j);
json read_json_file(const std::filesystem::path& path);

std::string format_double(double v);  // %.17g

// trace.csv: iteration,max_delta_j,max_delta_h
void write_trace_csv(const std::filesystem::path& path,
                     const bp::DiagnosticsTrace& trace);

// hilbert_trace.csv: iteration,frobenius_delta,hilbert_to_fixed_point
void write_fixed_point_csv(const std::filesystem::path& path,
                           const analysis::ContractionReport& report);

}  // namespace loopgbp::io
