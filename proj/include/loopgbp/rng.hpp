#pragma once

#include <cstdint>
#include <random>

#include "loopgbp/common.hpp"

namespace loopgbp {

// splitmix64 step; used to derive independent per-trial seeds so that batch
// kernels give the same results no matter how trials are scheduled.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed + 0x632be59bd9b4e019ULL * (stream + 1);
  return splitmix64(s);
}

inline Matrix random_gaussian(int rows, int cols, std::mt19937_64& eng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = normal(eng);
  return a;
}

// Symmetric positive definite draw, eigenvalues in roughly [ridge, 4+ridge].
inline Matrix random_pd(int n, std::mt19937_64& eng, double ridge = 0.05) {
  Matrix g = random_gaussian(n, n, eng);
  Matrix s = g.transpose() * g / double(n) + ridge * Matrix::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

// Symmetric PSD draw with Frobenius norm rescaled into [0.1, 2.1] so that
// increments are never degenerate at the tolerances the order checks use.
inline Matrix random_psd(int n, std::mt19937_64& eng) {
  Matrix g = random_gaussian(n, n, eng);
  Matrix d = g.transpose() * g;
  d = 0.5 * (d + d.transpose());
  std::uniform_real_distribution<double> mag(0.1, 2.1);
  double target = mag(eng);
  double norm = d.norm();
  if (norm > 0.0) d *= target / norm;
  return d;
}

// Haar-distributed orthogonal matrix via QR with sign-fixed R diagonal.
inline Matrix random_orthogonal(int n, std::mt19937_64& eng) {
  Matrix g = random_gaussian(n, n, eng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

}  // namespace loopgbp
