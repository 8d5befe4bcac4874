#include "threshtest/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "threshtest/errors.hpp"

namespace threshtest {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::InvalidSpec, std::string(what) + " contains non-finite entries");
  }
}

struct RowSpaceFactors {
  Matrix u;         // R x R
  Vector sigma;     // R
  Matrix row_basis; // P x R
  Matrix kernel;    // P x (P - R)
};

// Full SVD of A; validates full row rank.
RowSpaceFactors factor_rows(const Matrix& a, std::optional<double> rel_tol) {
  const Index r = a.rows();
  const Index p = a.cols();
  if (r == 0 || p == 0) {
    throw Error(ErrorKind::DimensionMismatch, "hypothesis matrix must be nonempty");
  }
  if (r > p) {
    throw Error(ErrorKind::RankDeficient,
                "hypothesis matrix has more rows (" + std::to_string(r) + ") than columns (" +
                    std::to_string(p) + ")");
  }
  require_finite(a, "hypothesis matrix");

  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double cutoff = rel_tol ? (*rel_tol) * smax : default_rank_tolerance(r, p, smax);
  const Index rank = (s.array() > cutoff).count();
  if (rank < r || smax == 0.0) {
    throw Error(ErrorKind::RankDeficient, "hypothesis matrix has numerical row rank " +
                                              std::to_string(rank) + " < " + std::to_string(r));
  }
  RowSpaceFactors f;
  f.u = svd.matrixU();
  f.sigma = s;
  f.row_basis = svd.matrixV().leftCols(r);
  f.kernel = svd.matrixV().rightCols(p - r);
  return f;
}

}  // namespace

RowPartition singleton_partition(Index rows) {
  RowPartition out;
  out.reserve(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) out.push_back({i});
  return out;
}

RowPartition whole_partition(Index rows) {
  std::vector<Index> all(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) all[static_cast<std::size_t>(i)] = i;
  return {all};
}

void validate_partition(const RowPartition& partition, Index rows) {
  std::vector<int> seen(static_cast<std::size_t>(rows), 0);
  for (const auto& block : partition) {
    if (block.empty()) throw Error(ErrorKind::InvalidSpec, "empty block in row partition");
    for (Index i : block) {
      if (i < 0 || i >= rows) {
        throw Error(ErrorKind::InvalidSpec, "row partition index " + std::to_string(i) +
                                                " out of range [0, " + std::to_string(rows) + ")");
      }
      if (seen[static_cast<std::size_t>(i)]++) {
        throw Error(ErrorKind::InvalidSpec,
                    "row partition blocks overlap at index " + std::to_string(i));
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorKind::InvalidSpec, "row partition does not cover every row");
  }
}

DesignMatrix::DesignMatrix(Matrix values, std::vector<std::string> column_names,
                           std::optional<Index> intercept_column)
    : values_(std::move(values)), names_(std::move(column_names)), intercept_(intercept_column) {
  if (values_.rows() < 2 || values_.cols() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "design needs N >= 2 rows and P >= 1 columns");
  }
  require_finite(values_, "design matrix");
  if (!names_.empty() && static_cast<Index>(names_.size()) != values_.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "column_names length does not match P");
  }
  if (intercept_) {
    if (*intercept_ < 0 || *intercept_ >= values_.cols()) {
      throw Error(ErrorKind::DimensionMismatch, "intercept column out of range");
    }
    if (!(values_.col(*intercept_).array() == 1.0).all()) {
      throw Error(ErrorKind::InvalidSpec, "intercept column is not all ones");
    }
  }
}

DesignMatrix DesignMatrix::with_intercept(const Matrix& covariates,
                                          std::vector<std::string> column_names) {
  Matrix values(covariates.rows(), covariates.cols() + 1);
  values.col(0).setOnes();
  values.rightCols(covariates.cols()) = covariates;
  if (!column_names.empty()) column_names.insert(column_names.begin(), "(intercept)");
  return DesignMatrix(std::move(values), std::move(column_names), Index{0});
}

Matrix DesignMatrix::covariates() const {
  if (!intercept_) return values_;
  Matrix out(rows(), cols() - 1);
  Index k = 0;
  for (Index j = 0; j < cols(); ++j) {
    if (j != *intercept_) out.col(k++) = values_.col(j);
  }
  return out;
}

LinearHypothesis::LinearHypothesis(Matrix a, Vector c, std::optional<RowPartition> partition)
    : a_(std::move(a)), c_(std::move(c)) {
  if (a_.rows() != c_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "A has " + std::to_string(a_.rows()) +
                                                  " rows but c has length " +
                                                  std::to_string(c_.size()));
  }
  require_finite(a_, "hypothesis matrix");
  require_finite(c_, "hypothesis vector");
  if (partition) {
    validate_partition(*partition, a_.rows());
    partition_ = std::move(*partition);
    explicit_partition_ = true;
  } else {
    partition_ = singleton_partition(a_.rows());
  }
}

LinearHypothesis LinearHypothesis::with_c(Vector c) const {
  LinearHypothesis out = *this;
  if (c.size() != a_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "replacement c has wrong length");
  }
  require_finite(c, "hypothesis vector");
  out.c_ = std::move(c);
  return out;
}

LinearHypothesis SubsetHypothesis::expand(Index p) const {
  if (j0 < 0 || j0 >= p) {
    throw Error(ErrorKind::InvalidSpec, "subset hypothesis needs 0 <= j0 < P");
  }
  if (c.size() != p - j0) {
    throw Error(ErrorKind::DimensionMismatch, "subset hypothesis c must have length P - j0");
  }
  Matrix a = Matrix::Zero(p - j0, p);
  a.rightCols(p - j0).setIdentity();
  return LinearHypothesis(std::move(a), c);
}

double default_rank_tolerance(Index rows, Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() *
         sigma_max;
}

Matrix kernel_basis(const Matrix& a, std::optional<double> rel_tol) {
  return factor_rows(a, rel_tol).kernel;
}

Vector min_norm_solution(const Matrix& a, const Vector& c) {
  if (c.size() != a.rows()) throw Error(ErrorKind::DimensionMismatch, "c length != rows of A");
  const auto f = factor_rows(a, std::nullopt);
  return f.row_basis * (f.u.transpose() * c).cwiseQuotient(f.sigma);
}

Vector ReducedProblem::project(const Vector& v) const {
  if (range_basis_.cols() == 0) return Vector::Zero(v.size());
  return range_basis_ * (range_basis_.transpose() * v);
}

Vector ReducedProblem::project_out(const Vector& v) const {
  if (range_basis_.cols() == 0) return v;
  return v - range_basis_ * (range_basis_.transpose() * v);
}

Vector ReducedProblem::pseudo_map(const Vector& v) const {
  // (A A^T)^{-1} A = U S^{-1} V1^T
  return left_basis_ * (row_basis_.transpose() * v).cwiseProduct(inv_singular_);
}

Vector ReducedProblem::multiplier(const Vector& r) const {
  if (r.size() != n_) throw Error(ErrorKind::DimensionMismatch, "residual length != N");
  return multiplier_op_ * r;
}

ReducedProblem ReducedProblem::with_c(const Vector& c) const {
  if (c.size() != r()) throw Error(ErrorKind::DimensionMismatch, "c length != R");
  ReducedProblem out = *this;
  // beta_c = V1 S^{-1} U^T c
  out.beta_c_ = row_basis_ * (left_basis_.transpose() * c).cwiseProduct(inv_singular_);
  return out;
}

ReducedProblem build_reduction(const DesignMatrix& x, const LinearHypothesis& hyp,
                               std::optional<double> rel_tol) {
  if (hyp.cols() != x.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "A has " + std::to_string(hyp.cols()) +
                                                  " columns but X has " +
                                                  std::to_string(x.cols()));
  }
  const auto f = factor_rows(hyp.a(), rel_tol);

  ReducedProblem red;
  red.n_ = x.rows();
  red.kernel_ = f.kernel;
  red.row_basis_ = f.row_basis;
  red.left_basis_ = f.u;
  red.inv_singular_ = f.sigma.cwiseInverse();
  red.beta_c_ = f.row_basis * (f.u.transpose() * hyp.c()).cwiseProduct(red.inv_singular_);

  const Index n = x.rows();
  if (f.kernel.cols() == 0) {
    red.range_basis_ = Matrix(n, 0);
  } else {
    const Matrix xk = x.values() * f.kernel;
    Eigen::BDCSVD<Matrix> svd(xk, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    const double cutoff =
        rel_tol ? (*rel_tol) * smax : default_rank_tolerance(xk.rows(), xk.cols(), smax);
    const Index rank = smax > 0.0 ? (s.array() > cutoff).count() : 0;
    red.range_basis_ = svd.matrixU().leftCols(rank);
  }
  if (red.rank_xka() >= n) {
    throw Error(ErrorKind::Untestable,
                "rank(X K_A) = N = " + std::to_string(n) +
                    "; no thresholding test exists since the zero-thresholding statistic "
                    "vanishes for every response");
  }
  // (A A^T)^{-1} A X^T, applied to residuals M times during calibration.
  red.multiplier_op_ = red.left_basis_ *
                       red.inv_singular_.asDiagonal() *
                       (x.values() * red.row_basis_).transpose();
  return red;
}

Vector residual(const ReducedProblem& red, const DesignMatrix& x, const Vector& y) {
  if (y.size() != x.rows() || x.rows() != red.n() || x.cols() != red.p()) {
    throw Error(ErrorKind::DimensionMismatch, "response/design do not match the reduction");
  }
  return red.project_out(y - x.values() * red.beta_c());
}

}  // namespace threshtest
