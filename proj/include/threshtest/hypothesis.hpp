#pragma once

// Model and hypothesis types, and the linear-algebra reduction of
// H0: A beta = c that every statistic consumes.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace threshtest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Blocks {H_1, ..., H_L} of row indices into A.
using RowPartition = std::vector<std::vector<Index>>;

RowPartition singleton_partition(Index rows);
RowPartition whole_partition(Index rows);

/// Throws InvalidSpec unless the blocks are nonempty, disjoint and cover
/// {0, ..., rows - 1}.
void validate_partition(const RowPartition& partition, Index rows);

class DesignMatrix {
 public:
  explicit DesignMatrix(Matrix values, std::vector<std::string> column_names = {},
                        std::optional<Index> intercept_column = std::nullopt);

  /// Prepends an all-ones column and marks it as the intercept.
  static DesignMatrix with_intercept(const Matrix& covariates,
                                     std::vector<std::string> column_names = {});

  const Matrix& values() const noexcept { return values_; }
  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  const std::vector<std::string>& column_names() const noexcept { return names_; }
  std::optional<Index> intercept_column() const noexcept { return intercept_; }

  /// Columns other than the intercept, in order.
  Matrix covariates() const;

 private:
  Matrix values_;
  std::vector<std::string> names_;
  std::optional<Index> intercept_;
};

class LinearHypothesis {
 public:
  /// `partition` defaults to singletons when omitted; group statistics
  /// that need a single block ask for `whole_partition` explicitly.
  LinearHypothesis(Matrix a, Vector c, std::optional<RowPartition> partition = std::nullopt);

  const Matrix& a() const noexcept { return a_; }
  const Vector& c() const noexcept { return c_; }
  Index rows() const noexcept { return a_.rows(); }
  Index cols() const noexcept { return a_.cols(); }
  const RowPartition& partition() const noexcept { return partition_; }
  bool has_explicit_partition() const noexcept { return explicit_partition_; }

  LinearHypothesis with_c(Vector c) const;

 private:
  Matrix a_;
  Vector c_;
  RowPartition partition_;
  bool explicit_partition_ = false;
};

/// H0: (beta_{j0+1}, ..., beta_P) = c, i.e. A = [O I_{P-j0}].
struct SubsetHypothesis {
  Index j0 = 0;
  Vector c;

  LinearHypothesis expand(Index p) const;
};

/// Default singular-value cutoff: max(rows, cols) * eps * sigma_max.
double default_rank_tolerance(Index rows, Index cols, double sigma_max);

/// Orthonormal basis of ker(A), P x (P - R). Throws RankDeficient when A
/// does not have full row rank. `rel_tol` overrides max(R, P) * eps.
Matrix kernel_basis(const Matrix& a, std::optional<double> rel_tol = std::nullopt);

/// beta_c = A^T (A A^T)^{-1} c.
Vector min_norm_solution(const Matrix& a, const Vector& c);

/// Everything needed to evaluate r = (I - P_{X K_A})(y - X beta_c) and the
/// multiplier (A A^T)^{-1} A X^T r. Immutable once built.
class ReducedProblem {
 public:
  Index n() const noexcept { return n_; }
  Index p() const noexcept { return kernel_.rows(); }
  Index r() const noexcept { return row_basis_.cols(); }

  const Matrix& kernel_basis() const noexcept { return kernel_; }
  const Vector& beta_c() const noexcept { return beta_c_; }
  const Matrix& projector_factor() const noexcept { return range_basis_; }
  Index rank_xka() const noexcept { return range_basis_.cols(); }

  /// P_{X K_A} v.
  Vector project(const Vector& v) const;
  /// (I - P_{X K_A}) v.
  Vector project_out(const Vector& v) const;
  /// (A A^T)^{-1} A v for v of length P.
  Vector pseudo_map(const Vector& v) const;
  /// (A A^T)^{-1} A X^T r, precomputed as an R x N operator.
  Vector multiplier(const Vector& r) const;
  const Matrix& multiplier_operator() const noexcept { return multiplier_op_; }

  /// Same reduction with beta_c recomputed for another right-hand side.
  ReducedProblem with_c(const Vector& c) const;

 private:
  friend ReducedProblem build_reduction(const DesignMatrix&, const LinearHypothesis&,
                                        std::optional<double>);
  ReducedProblem() = default;

  Index n_ = 0;
  Matrix kernel_;
  Matrix row_basis_;      // V1: P x R, right singular vectors of A
  Vector inv_singular_;   // 1 / sigma_i(A)
  Matrix left_basis_;     // U: R x R
  Vector beta_c_;
  Matrix range_basis_;    // orthonormal basis of range(X K_A)
  Matrix multiplier_op_;  // (A A^T)^{-1} A X^T
};

/// Throws Untestable when rank(X K_A) = N.
ReducedProblem build_reduction(const DesignMatrix& x, const LinearHypothesis& hyp,
                               std::optional<double> rel_tol = std::nullopt);

/// r = (I - P_{X K_A})(y - X beta_c).
Vector residual(const ReducedProblem& red, const DesignMatrix& x, const Vector& y);

}  // namespace threshtest
