#include "loopgbp/exact.hpp"

#include <Eigen/Cholesky>
#include <sstream>

namespace loopgbp::oracle {

namespace {

ExactMarginals solve_joint(const CyclicModel& model, const Evidence& ev) {
  JointInformation joint = joint_information(model, ev);
  int k = model.num_nodes, n = model.state_dim;

  Eigen::LDLT<Matrix> ldlt(joint.j);
  Vector mu = ldlt.solve(joint.h);
  // One step of iterative refinement, then hold the residual to the contract.
  mu += ldlt.solve(joint.h - joint.j * mu);
  double residual = (joint.j * mu - joint.h).norm();
  if (!(residual <= 1e-10 * (1.0 + joint.h.norm()))) {
    std::ostringstream os;
    os << "exact smoother: solver residual " << residual
       << " exceeds 1e-10 * (1 + ||h||)";
    throw DegeneracyError(os.str());
  }

  Matrix cov = ldlt.solve(Matrix::Identity(n * k, n * k));
  cov = 0.5 * (cov + cov.transpose()).eval();

  ExactMarginals out;
  out.means.reserve(k);
  out.covariances.reserve(k);
  for (int i = 0; i < k; ++i) {
    out.means.push_back(mu.segment(i * n, n));
    Matrix block = cov.block(i * n, i * n, n, n);
    out.covariances.push_back(0.5 * (block + block.transpose()));
  }
  return out;
}

}  // namespace

ExactMarginals exact_smooth(const CyclicModel& model, const Evidence& ev) {
  require_valid(model);
  return solve_joint(model, ev);
}

ExactMarginals exact_smooth_cut(const CyclicModel& model, const Evidence& ev,
                                int cut_edge) {
  if (cut_edge < 0 || cut_edge >= model.num_nodes) {
    std::ostringstream os;
    os << "exact_smooth_cut: cut edge " << cut_edge << " out of range [0, "
       << model.num_nodes << ")";
    throw std::invalid_argument(os.str());
  }
  require_valid(model);
  // Removing an edge is the same as zeroing its contribution.
  CyclicModel cut = model;
  int n = model.state_dim;
  cut.edges[cut_edge].p11 = Matrix::Zero(n, n);
  cut.edges[cut_edge].p12 = Matrix::Zero(n, n);
  cut.edges[cut_edge].p22 = Matrix::Zero(n, n);
  return solve_joint(cut, ev);
}

}  // namespace loopgbp::oracle
