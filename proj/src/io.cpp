#include "loopgbp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace loopgbp::io {

namespace {

const json& get_field(const json& j, const char* name, const char* where) {
  auto it = j.find(name);
  if (it == j.end()) {
    std::ostringstream os;
    os << where << ": missing field '" << name << "'";
    throw std::invalid_argument(os.str());
  }
  return *it;
}

void write_csv_line(std::ofstream& out, std::initializer_list<double> values,
                    int iteration) {
  out << iteration;
  for (double v : values) out << ',' << format_double(v);
  out << '\n';
}

}  // namespace

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    std::ostringstream os;
    os << what << ": expected a nonempty array of rows";
    throw std::invalid_argument(os.str());
  }
  size_t rows = j.size(), cols = j.front().size();
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      std::ostringstream os;
      os << what << ": row " << r << " has inconsistent length";
      throw std::invalid_argument(os.str());
    }
    for (size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) {
    std::ostringstream os;
    os << what << ": expected an array";
    throw std::invalid_argument(os.str());
  }
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json model_to_json(const CyclicModel& model) {
  json j;
  j["num_nodes"] = model.num_nodes;
  j["state_dim"] = model.state_dim;
  j["obs_dim"] = model.obs_dim;
  json edges = json::array();
  for (const EdgePotential& e : model.edges) {
    json blk;
    blk["p11"] = matrix_to_json(e.p11);
    blk["p12"] = matrix_to_json(e.p12);
    blk["p22"] = matrix_to_json(e.p22);
    edges.push_back(std::move(blk));
  }
  j["edges"] = std::move(edges);
  json nodes = json::array();
  for (const NodePotential& n : model.nodes) {
    json blk;
    blk["p11"] = matrix_to_json(n.p11);
    blk["p12"] = matrix_to_json(n.p12);
    blk["p22"] = matrix_to_json(n.p22);
    nodes.push_back(std::move(blk));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

CyclicModel model_from_json(const json& j) {
  CyclicModel model;
  model.num_nodes = get_field(j, "num_nodes", "model").get<int>();
  model.state_dim = get_field(j, "state_dim", "model").get<int>();
  model.obs_dim = get_field(j, "obs_dim", "model").get<int>();
  const json& edges = get_field(j, "edges", "model");
  const json& nodes = get_field(j, "nodes", "model");
  for (size_t i = 0; i < edges.size(); ++i) {
    std::string where = "model edges[" + std::to_string(i) + "]";
    EdgePotential e;
    e.p11 = matrix_from_json(get_field(edges[i], "p11", where.c_str()), where.c_str());
    e.p12 = matrix_from_json(get_field(edges[i], "p12", where.c_str()), where.c_str());
    e.p22 = matrix_from_json(get_field(edges[i], "p22", where.c_str()), where.c_str());
    model.edges.push_back(std::move(e));
  }
  for (size_t i = 0; i < nodes.size(); ++i) {
    std::string where = "model nodes[" + std::to_string(i) + "]";
    NodePotential n;
    n.p11 = matrix_from_json(get_field(nodes[i], "p11", where.c_str()), where.c_str());
    n.p12 = matrix_from_json(get_field(nodes[i], "p12", where.c_str()), where.c_str());
    n.p22 = matrix_from_json(get_field(nodes[i], "p22", where.c_str()), where.c_str());
    model.nodes.push_back(std::move(n));
  }
  return model;
}

json evidence_to_json(const Evidence& ev) {
  json obs = json::array();
  for (const Vector& y : ev.observations) obs.push_back(vector_to_json(y));
  json j;
  j["observations"] = std::move(obs);
  return j;
}

Evidence evidence_from_json(const json& j) {
  const json& obs = get_field(j, "observations", "evidence");
  Evidence ev;
  for (size_t i = 0; i < obs.size(); ++i) {
    std::string where = "evidence observations[" + std::to_string(i) + "]";
    ev.observations.push_back(vector_from_json(obs[i], where.c_str()));
  }
  return ev;
}

MarginalsDoc from_beliefs(const std::vector<bp::Belief>& beliefs) {
  MarginalsDoc doc;
  doc.num_nodes = int(beliefs.size());
  doc.state_dim = beliefs.empty() ? 0 : int(beliefs.front().mean.size());
  for (const bp::Belief& b : beliefs) {
    doc.means.push_back(b.mean);
    doc.covariances.push_back(b.covariance);
  }
  return doc;
}

MarginalsDoc from_exact(const oracle::ExactMarginals& marginals) {
  MarginalsDoc doc;
  doc.num_nodes = int(marginals.means.size());
  doc.state_dim = marginals.means.empty() ? 0 : int(marginals.means.front().size());
  doc.means = marginals.means;
  doc.covariances = marginals.covariances;
  return doc;
}

json marginals_to_json(const MarginalsDoc& doc) {
  json nodes = json::array();
  for (int i = 0; i < doc.num_nodes; ++i) {
    json node;
    node["mean"] = vector_to_json(doc.means[i]);
    node["covariance"] = matrix_to_json(doc.covariances[i]);
    nodes.push_back(std::move(node));
  }
  json j;
  j["num_nodes"] = doc.num_nodes;
  j["state_dim"] = doc.state_dim;
  j["nodes"] = std::move(nodes);
  return j;
}

MarginalsDoc marginals_from_json(const json& j) {
  MarginalsDoc doc;
  doc.num_nodes = get_field(j, "num_nodes", "marginals").get<int>();
  doc.state_dim = get_field(j, "state_dim", "marginals").get<int>();
  const json& nodes = get_field(j, "nodes", "marginals");
  if (int(nodes.size()) != doc.num_nodes)
    throw std::invalid_argument("marginals: node count does not match num_nodes");
  for (size_t i = 0; i < nodes.size(); ++i) {
    std::string where = "marginals nodes[" + std::to_string(i) + "]";
    doc.means.push_back(
        vector_from_json(get_field(nodes[i], "mean", where.c_str()), where.c_str()));
    doc.covariances.push_back(matrix_from_json(
        get_field(nodes[i], "covariance", where.c_str()), where.c_str()));
  }
  return doc;
}

CompareReport compare(const MarginalsDoc& got, const MarginalsDoc& reference) {
  if (got.num_nodes != reference.num_nodes || got.state_dim != reference.state_dim)
    throw std::invalid_argument("compare: documents have mismatched shapes");
  CompareReport report;
  for (int i = 0; i < got.num_nodes; ++i) {
    if (got.means[i].size() != reference.means[i].size() ||
        got.covariances[i].rows() != reference.covariances[i].rows())
      throw std::invalid_argument("compare: node " + std::to_string(i) +
                                  " has mismatched dimensions");
    double me = (got.means[i] - reference.means[i]).norm() /
                (1.0 + reference.means[i].norm());
    double ce = (got.covariances[i] - reference.covariances[i]).norm() /
                reference.covariances[i].norm();
    report.mean_errors.push_back(me);
    report.cov_errors.push_back(ce);
    report.max_mean_error = std::max(report.max_mean_error, me);
    report.max_cov_error = std::max(report.max_cov_error, ce);
  }
  return report;
}

json compare_to_json(const CompareReport& report) {
  json nodes = json::array();
  for (size_t i = 0; i < report.mean_errors.size(); ++i) {
    json node;
    node["mean_rel_err"] = report.mean_errors[i];
    node["cov_rel_err"] = report.cov_errors[i];
    nodes.push_back(std::move(node));
  }
  json j;
  j["nodes"] = std::move(nodes);
  j["max_mean_rel_err"] = report.max_mean_error;
  j["max_cov_rel_err"] = report.max_cov_error;
  return j;
}

json sample_to_json(const PathSample& draw) {
  json states = json::array();
  for (const Vector& x : draw.states) states.push_back(vector_to_json(x));
  json j;
  j["states"] = std::move(states);
  return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    // err.what() carries the byte position of the failure.
    throw std::invalid_argument(path.string() + ": " + err.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trace_csv(const std::filesystem::path& path,
                     const bp::DiagnosticsTrace& trace) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iteration,max_delta_j,max_delta_h\n";
  for (const bp::TraceRow& row : trace)
    write_csv_line(out, {row.max_delta_j, row.max_delta_h}, row.iteration);
}

void write_fixed_point_csv(const std::filesystem::path& path,
                           const analysis::ContractionReport& report) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iteration,frobenius_delta,hilbert_to_fixed_point\n";
  for (size_t t = 0; t < report.frobenius_deltas.size(); ++t)
    write_csv_line(out, {report.frobenius_deltas[t], report.hilbert_to_fixed_point[t]},
                   int(t));
}

}  // namespace loopgbp::io
