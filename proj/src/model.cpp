#include "loopgbp/model.hpp"

#include <Eigen/Cholesky>
#include <random>
#include <sstream>

#include "loopgbp/cone_geometry.hpp"
#include "loopgbp/rng.hpp"

namespace loopgbp {

namespace {

bool dims_match(const Matrix& m, int rows, int cols) {
  return m.rows() == rows && m.cols() == cols;
}

void check_block(std::vector<std::string>& out, const Matrix& m, int rows,
                 int cols, const std::string& where) {
  if (!dims_match(m, rows, cols)) {
    std::ostringstream os;
    os << where << " has shape " << m.rows() << "x" << m.cols()
       << ", expected " << rows << "x" << cols;
    out.push_back(os.str());
  }
}

Matrix assembled_edge(const EdgePotential& e) {
  int n = int(e.p11.rows());
  Matrix block(2 * n, 2 * n);
  block.topLeftCorner(n, n) = e.p11;
  block.topRightCorner(n, n) = e.p12;
  block.bottomLeftCorner(n, n) = e.p12.transpose();
  block.bottomRightCorner(n, n) = e.p22;
  return block;
}

// PSD within floating-point slack; PD per the lmin > 1e-12*||X|| rule.
bool is_psd(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x, Eigen::EigenvaluesOnly);
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() >= -1e-10 * (1.0 + lmax);
}

bool is_pd(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x, Eigen::EigenvaluesOnly);
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() > 1e-12 * lmax;
}

}  // namespace

std::vector<std::string> validate(const CyclicModel& model) {
  std::vector<std::string> out;
  if (model.num_nodes < 3) {
    std::ostringstream os;
    os << "num_nodes must be at least 3, got " << model.num_nodes;
    out.push_back(os.str());
  }
  if (model.state_dim < 1) out.push_back("state_dim must be at least 1");
  if (model.obs_dim < 1) out.push_back("obs_dim must be at least 1");
  if (!out.empty()) return out;

  int k = model.num_nodes, n = model.state_dim, m = model.obs_dim;
  if (int(model.edges.size()) != k) {
    std::ostringstream os;
    os << "edge count " << model.edges.size() << " != num_nodes " << k
       << " (loop not closed)";
    out.push_back(os.str());
  }
  if (int(model.nodes.size()) != k) {
    std::ostringstream os;
    os << "node potential count " << model.nodes.size() << " != num_nodes " << k;
    out.push_back(os.str());
  }
  if (!out.empty()) return out;

  for (int i = 0; i < k; ++i) {
    const EdgePotential& e = model.edges[i];
    std::ostringstream where;
    where << "edge " << i;
    check_block(out, e.p11, n, n, where.str() + " p11");
    check_block(out, e.p12, n, n, where.str() + " p12");
    check_block(out, e.p22, n, n, where.str() + " p22");
    if (dims_match(e.p11, n, n) && dims_match(e.p12, n, n) &&
        dims_match(e.p22, n, n)) {
      if (!is_symmetric(e.p11)) out.push_back(where.str() + " p11 not symmetric");
      if (!is_symmetric(e.p22)) out.push_back(where.str() + " p22 not symmetric");
      if (is_symmetric(e.p11) && is_symmetric(e.p22) &&
          !is_psd(assembled_edge(e)))
        out.push_back(where.str() + " assembled block not PSD");
    }
  }
  for (int i = 0; i < k; ++i) {
    const NodePotential& node = model.nodes[i];
    std::ostringstream where;
    where << "node " << i;
    check_block(out, node.p11, n, n, where.str() + " p11");
    check_block(out, node.p12, n, m, where.str() + " p12");
    check_block(out, node.p22, m, m, where.str() + " p22");
    if (dims_match(node.p11, n, n)) {
      if (!is_symmetric(node.p11))
        out.push_back(where.str() + " p11 not symmetric");
      else if (!is_psd(node.p11))
        out.push_back(where.str() + " p11 not PSD");
    }
    if (dims_match(node.p22, m, m)) {
      if (!is_symmetric(node.p22))
        out.push_back(where.str() + " p22 not symmetric");
      else if (!is_pd(node.p22))
        out.push_back(where.str() + " p22 not PD");
    }
  }
  if (!out.empty()) return out;

  // Conditioning on any observation leaves the same precision over the
  // hidden path, so PD of the assembled J with zero evidence suffices.
  Evidence zero;
  zero.observations.assign(k, Vector::Zero(m));
  Matrix j(n * k, n * k);
  j.setZero();
  for (int i = 0; i < k; ++i) {
    int a = i, b = (i + 1) % k;
    j.block(a * n, a * n, n, n) += model.edges[i].p11;
    j.block(b * n, b * n, n, n) += model.edges[i].p22;
    j.block(a * n, b * n, n, n) += model.edges[i].p12;
    j.block(b * n, a * n, n, n) += model.edges[i].p12.transpose();
    j.block(i * n, i * n, n, n) += model.nodes[i].p11;
  }
  j = 0.5 * (j + j.transpose()).eval();
  if (!is_pd(j))
    out.push_back("joint precision over the hidden path is not PD");
  return out;
}

void require_valid(const CyclicModel& model) {
  std::vector<std::string> violations = validate(model);
  if (violations.empty()) return;
  std::string msg = "invalid model:";
  for (const std::string& v : violations) msg += "\n  - " + v;
  throw std::invalid_argument(msg);
}

EvidenceMessage evidence_message(const NodePotential& node, const Vector& y) {
  if (node.p12.rows() != node.p11.rows() || node.p12.cols() != y.size()) {
    std::ostringstream os;
    os << "evidence_message: observation length " << y.size()
       << " does not match p12 (" << node.p12.rows() << "x" << node.p12.cols()
       << ")";
    throw std::invalid_argument(os.str());
  }
  EvidenceMessage msg;
  msg.j = node.p11;
  msg.h = -node.p12 * y;
  return msg;
}

std::vector<EvidenceMessage> evidence_messages(const CyclicModel& model,
                                               const Evidence& ev) {
  if (int(ev.observations.size()) != model.num_nodes) {
    std::ostringstream os;
    os << "evidence has " << ev.observations.size() << " observations, model has "
       << model.num_nodes << " nodes";
    throw std::invalid_argument(os.str());
  }
  std::vector<EvidenceMessage> out;
  out.reserve(model.num_nodes);
  for (int i = 0; i < model.num_nodes; ++i)
    out.push_back(evidence_message(model.nodes[i], ev.observations[i]));
  return out;
}

JointInformation joint_information(const CyclicModel& model, const Evidence& ev) {
  int k = model.num_nodes, n = model.state_dim;
  std::vector<EvidenceMessage> msgs = evidence_messages(model, ev);
  JointInformation out;
  out.j = Matrix::Zero(n * k, n * k);
  out.h = Vector::Zero(n * k);
  for (int i = 0; i < k; ++i) {
    int a = i, b = (i + 1) % k;
    out.j.block(a * n, a * n, n, n) += model.edges[i].p11;
    out.j.block(b * n, b * n, n, n) += model.edges[i].p22;
    out.j.block(a * n, b * n, n, n) += model.edges[i].p12;
    out.j.block(b * n, a * n, n, n) += model.edges[i].p12.transpose();
  }
  for (int i = 0; i < k; ++i) {
    out.j.block(i * n, i * n, n, n) += msgs[i].j;
    out.h.segment(i * n, n) += msgs[i].h;
  }
  out.j = 0.5 * (out.j + out.j.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(out.j, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lmin > 1e-12 * lmax))
    throw DegeneracyError("joint_information: assembled precision is not PD");
  return out;
}

std::vector<PathSample> sample(const CyclicModel& model, std::uint64_t seed,
                               int count) {
  if (count < 1) throw std::invalid_argument("sample: count must be positive");
  require_valid(model);
  int k = model.num_nodes, n = model.state_dim, m = model.obs_dim;
  int dx = k * n, dy = k * m, d = dx + dy;

  // Joint precision over (x_0..x_{K-1}, y_0..y_{K-1}); the potentials carry
  // no linear term, so the joint is zero-mean.
  Matrix p = Matrix::Zero(d, d);
  for (int i = 0; i < k; ++i) {
    int a = i, b = (i + 1) % k;
    p.block(a * n, a * n, n, n) += model.edges[i].p11;
    p.block(b * n, b * n, n, n) += model.edges[i].p22;
    p.block(a * n, b * n, n, n) += model.edges[i].p12;
    p.block(b * n, a * n, n, n) += model.edges[i].p12.transpose();
  }
  for (int i = 0; i < k; ++i) {
    const NodePotential& node = model.nodes[i];
    p.block(i * n, i * n, n, n) += node.p11;
    p.block(dx + i * m, dx + i * m, m, m) += node.p22;
    p.block(i * n, dx + i * m, n, m) += node.p12;
    p.block(dx + i * m, i * n, m, n) += node.p12.transpose();
  }
  p = 0.5 * (p + p.transpose()).eval();

  Eigen::LLT<Matrix> llt(p);
  if (llt.info() != Eigen::Success)
    throw DegeneracyError("sample: joint precision over states and observations is not PD");

  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<PathSample> draws;
  draws.reserve(count);
  for (int c = 0; c < count; ++c) {
    Vector w(d);
    for (int i = 0; i < d; ++i) w(i) = normal(eng);
    // z = L^-T w has covariance (L L^T)^-1 = P^-1.
    Vector z = llt.matrixU().solve(w);
    PathSample draw;
    draw.states.reserve(k);
    draw.evidence.observations.reserve(k);
    for (int i = 0; i < k; ++i) draw.states.push_back(z.segment(i * n, n));
    for (int i = 0; i < k; ++i)
      draw.evidence.observations.push_back(z.segment(dx + i * m, m));
    draws.push_back(std::move(draw));
  }
  return draws;
}

namespace {

// Diagonal block A^T A + 0.1 I with A = base * (orthogonal) + jitter * G.
// Keeping A close to a scaled orthogonal matrix keeps the eigenvalue spread
// tight, so the whitened cross blocks below control correlations uniformly.
Matrix random_diag_block(int n, double base, double jitter,
                         std::mt19937_64& eng) {
  Matrix a = base * random_orthogonal(n, eng) +
             jitter / std::sqrt(double(n)) * random_gaussian(n, n, eng);
  Matrix s = a.transpose() * a + 0.1 * Matrix::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

Matrix chol_lower(const Matrix& s) {
  return Eigen::LLT<Matrix>(s).matrixL();
}

// Cross block frac * L1 * Q * L2^T with Q a partial isometry, so the
// assembled block equals blkdiag(L1,L2) [[I, fQ],[fQ^T, I]] blkdiag(L1,L2)^T
// and stays PSD with margin (1 - frac) for any draw.
Matrix cross_block(const Matrix& l1, const Matrix& l2, double frac,
                   std::mt19937_64& eng) {
  int r = int(l1.rows()), c = int(l2.rows());
  int p = std::max(r, c);
  Matrix q = random_orthogonal(p, eng).topLeftCorner(r, c);
  return frac * l1 * q * l2.transpose();
}

}  // namespace

CyclicModel random_model(int num_nodes, int state_dim, int obs_dim,
                         double coupling_strength, std::uint64_t seed) {
  if (num_nodes < 3)
    throw std::invalid_argument("random_model: num_nodes must be at least 3");
  if (state_dim < 1 || obs_dim < 1)
    throw std::invalid_argument("random_model: dimensions must be positive");
  if (!(coupling_strength >= 0.0 && coupling_strength < 1.0))
    throw std::invalid_argument("random_model: coupling_strength must lie in [0, 1)");

  std::mt19937_64 eng(seed);
  CyclicModel model;
  model.num_nodes = num_nodes;
  model.state_dim = state_dim;
  model.obs_dim = obs_dim;
  model.edges.reserve(num_nodes);
  model.nodes.reserve(num_nodes);

  for (int i = 0; i < num_nodes; ++i) {
    EdgePotential e;
    e.p11 = random_diag_block(state_dim, 2.0, 0.5, eng);
    e.p22 = random_diag_block(state_dim, 2.0, 0.5, eng);
    e.p12 = cross_block(chol_lower(e.p11), chol_lower(e.p22),
                        coupling_strength, eng);
    model.edges.push_back(std::move(e));
  }
  for (int i = 0; i < num_nodes; ++i) {
    // Observations are kept weakly informative relative to the edge scale so
    // loop-induced effects stay visible in the experiments. The node cross
    // block scales with coupling_strength too: at zero coupling the model has
    // no p12 anywhere.
    NodePotential node;
    node.p11 = random_diag_block(state_dim, 0.3, 0.1, eng);
    node.p22 = random_diag_block(obs_dim, 1.0, 0.3, eng);
    node.p12 = cross_block(chol_lower(node.p11), chol_lower(node.p22),
                           0.5 * coupling_strength, eng);
    model.nodes.push_back(std::move(node));
  }

  require_valid(model);
  return model;
}

}  // namespace loopgbp
