#include "loopgbp/cone_geometry.hpp"

#include <cmath>
#include <sstream>

namespace loopgbp {

namespace {

void require_square(const Matrix& x, const char* name) {
  if (x.rows() == 0 || x.rows() != x.cols()) {
    std::ostringstream os;
    os << name << " must be square and nonempty, got " << x.rows() << "x"
       << x.cols();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

bool is_symmetric(const Matrix& x) {
  if (x.rows() != x.cols()) return false;
  double scale = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  double skew = (x - x.transpose()).cwiseAbs().maxCoeff();
  return skew <= 1e-12 * (1.0 + scale);
}

void require_symmetric(const Matrix& x, const char* name) {
  require_square(x, name);
  if (!is_symmetric(x)) {
    std::ostringstream os;
    os << name << " is not symmetric (max |X - X^T| = "
       << (x - x.transpose()).cwiseAbs().maxCoeff() << ")";
    throw std::invalid_argument(os.str());
  }
}

void require_positive_definite(const Matrix& x, const char* name) {
  require_symmetric(x, name);
  Eigen::SelfAdjointEigenSolver<Matrix> es(x, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lmin > 1e-12 * lmax)) {
    std::ostringstream os;
    os << name << " is not positive definite (lmin = " << lmin << ", ||X|| = "
       << lmax << ")";
    throw std::domain_error(os.str());
  }
}

double hilbert_dist_orthant(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() == 0)
    throw std::invalid_argument("hilbert_dist_orthant: size mismatch");
  double rmax = -1.0, rmin = -1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) > 0.0))
      throw std::domain_error("hilbert_dist_orthant: first argument has a nonpositive entry");
    if (!(y(i) > 0.0))
      throw std::domain_error("hilbert_dist_orthant: second argument has a nonpositive entry");
    double r = x(i) / y(i);
    if (rmax < 0.0 || r > rmax) rmax = r;
    if (rmin < 0.0 || r < rmin) rmin = r;
  }
  return std::log(rmax / rmin);
}

double hilbert_dist_psd(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("hilbert_dist_psd: dimension mismatch");
  require_positive_definite(x, "hilbert_dist_psd: first argument");
  require_positive_definite(y, "hilbert_dist_psd: second argument");
  // Generalized symmetric problem X v = lambda Y v shares its spectrum with
  // X Y^-1 but stays in symmetric territory (Cholesky of Y internally).
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(
      x, y, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  double lmin = es.eigenvalues().minCoeff();
  double lmax = es.eigenvalues().maxCoeff();
  return std::log(lmax / lmin);
}

bool psd_leq(const Matrix& x, const Matrix& y, double tol) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("psd_leq: dimension mismatch");
  require_symmetric(x, "psd_leq: first argument");
  require_symmetric(y, "psd_leq: second argument");
  return min_eigenvalue(y - x) >= -tol;
}

double min_eigenvalue(const Matrix& x) {
  require_symmetric(x, "min_eigenvalue: argument");
  Eigen::SelfAdjointEigenSolver<Matrix> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace loopgbp
