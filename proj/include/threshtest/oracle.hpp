#pragma once

// Brute-force references for the closed-form statistics, usable only at
// toy scale: an iterative affine (group) lasso solver, a bisection search
// for the zero-thresholding level, and the constrained least-squares KKT
// system. Nothing here shares code with the reduction in hypothesis.hpp.

#include <optional>

#include "threshtest/hypothesis.hpp"

namespace threshtest::oracle {

struct SolveReport {
  Vector beta_hat;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  /// A beta-hat - c as carried by the solver; the prox step zeroes blocks exactly.
  Vector offset;
};

struct SolverOptions {
  double tol = 1e-12;
  std::size_t max_iter = 200000;
};

/// Minimizes 1/2 ||y - X beta||^2 + lambda sum_l ||A^{H_l} beta - c_{H_l}||_j
/// for j in {1, 2} by accelerated proximal gradient in the coordinates
/// beta = A^T (A A^T)^{-1} (c + w) + K v, where the penalty only touches w.
/// `partition` defaults to singletons (j = 1) or one block (j = 2).
SolveReport solve_affine_lasso(const Matrix& x, const Vector& y, const Matrix& a, const Vector& c,
                               double lambda, int j,
                               const std::optional<RowPartition>& partition = std::nullopt,
                               const SolverOptions& opts = {},
                               const std::optional<Vector>& warm_start = std::nullopt);

/// ||A beta - c||_inf below which the KKT check treats a block as inactive.
inline constexpr double kActiveThreshold = 1e-8;

struct ZeroThresholdReport {
  double lambda0 = 0.0;
  double lambda_below = 0.0;  // largest probed lambda with A beta-hat != c
  double lambda_above = 0.0;  // smallest probed lambda with A beta-hat = c
  SolveReport below;
  SolveReport above;
};

/// Bisection on lambda until the bracket is narrower than `tol` (absolute).
ZeroThresholdReport oracle_zero_threshold_report(
    const Matrix& x, const Vector& y, const Matrix& a, const Vector& c, int j,
    const std::optional<RowPartition>& partition = std::nullopt, double tol = 1e-6);

double oracle_zero_threshold(const Matrix& x, const Vector& y, const Matrix& a, const Vector& c,
                             int j, const std::optional<RowPartition>& partition = std::nullopt,
                             double tol = 1e-6);

struct ConstrainedFit {
  Vector beta_hat;
  Vector z_hat;  // Lagrange multiplier of A beta = c
};

/// Solves [X^T X  A^T; A  O] [beta; z] = [X^T y; c]. Throws SingularSystem.
ConstrainedFit constrained_ls(const Matrix& x, const Vector& y, const Matrix& a, const Vector& c);

}  // namespace threshtest::oracle
