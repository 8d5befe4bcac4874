#pragma once

#include <random>

#include "threshtest/hypothesis.hpp"

namespace testutil {

using threshtest::Index;
using threshtest::Matrix;
using threshtest::Vector;

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

inline Vector gaussian_vector(Index n, std::mt19937_64& rng) {
  return gaussian_matrix(n, 1, rng).col(0);
}

/// Dense P_{M} = M (M^T M)^+ M^T from the pseudo-inverse; oracle only.
inline Matrix dense_projector(const Matrix& m) {
  if (m.cols() == 0) return Matrix::Zero(m.rows(), m.rows());
  const Matrix pinv = m.completeOrthogonalDecomposition().pseudoInverse();
  return m * pinv;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
