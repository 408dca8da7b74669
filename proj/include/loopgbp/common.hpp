#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace loopgbp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Execution policy for the data-parallel kernels. Both policies produce
// bitwise-identical results; `openmp` only changes who computes which slot.
enum class Execution { serial, openmp };

// Numerical failure while inverting a message denominator. `index` is the
// edge (or composed-map stage) the failure occurred at, -1 if unknown.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& msg, int index_ = -1)
      : std::runtime_error(msg), index(index_) {}
  int index;
};

// A belief or joint precision that should have been PD but is not.
// `index` is the node involved, -1 for the full joint.
class DegeneracyError : public std::runtime_error {
 public:
  DegeneracyError(const std::string& msg, int index_ = -1)
      : std::runtime_error(msg), index(index_) {}
  int index;
};

}  // namespace loopgbp
