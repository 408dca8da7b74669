#pragma once

// Internal checked SPD solve shared by the message updates and the extracted
// precision maps, so the two compute identical bits for identical inputs.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <sstream>

#include "loopgbp/common.hpp"

namespace loopgbp::detail {

// Eigenvalue-margin check (lmin > 1e-12 * ||S||_2) followed by LDLT. LDLT is
// square-root free, which keeps the 1x1 case bit-identical to the plain
// scalar recursion b/d.
class SpdSolver {
 public:
  SpdSolver(const Matrix& s, const char* what, int index) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(lmin > 1e-12 * lmax)) {
      std::ostringstream os;
      os << what;
      if (index >= 0) os << " " << index;
      os << ": denominator singular (lmin = " << lmin << ", ||S|| = " << lmax
         << ")";
      throw SingularityError(os.str(), index);
    }
    ldlt_.compute(s);
  }

  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& rhs) const {
    return ldlt_.solve(rhs).eval();
  }

 private:
  Eigen::LDLT<Matrix> ldlt_;
};

// a - b S^-1 b^T, symmetrized.
inline Matrix schur_complement(const Matrix& a, const Matrix& b,
                               const SpdSolver& s) {
  Matrix r = a - b * s.solve(b.transpose());
  return 0.5 * (r + r.transpose());
}

}  // namespace loopgbp::detail
