#pragma once

// Hilbert projective metric on the positive orthant and the PSD cone,
// plus the Loewner-order helpers the convergence diagnostics build on.

#include "loopgbp/common.hpp"

namespace loopgbp {

// d(x, y) = log(max_i(x_i/y_i) / min_i(x_i/y_i)); requires strictly positive
// entries and equal lengths. Invariant under positive rescaling of either arg.
double hilbert_dist_orthant(const Vector& x, const Vector& y);

// PSD-cone version, log(lmax/lmin) of the generalized eigenvalues of
// X v = lambda Y v. Both arguments must be symmetric positive definite; the
// nonsymmetric product X*Y^-1 is never formed.
double hilbert_dist_psd(const Matrix& x, const Matrix& y);

// Loewner order test: true iff lmin(Y - X) >= -tol.
bool psd_leq(const Matrix& x, const Matrix& y, double tol);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& x);

// Validation helpers shared across modules. `name` identifies the offending
// argument in the thrown message.
bool is_symmetric(const Matrix& x);
void require_symmetric(const Matrix& x, const char* name);
void require_positive_definite(const Matrix& x, const char* name);

}  // namespace loopgbp
