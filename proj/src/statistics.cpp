#include "threshtest/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "threshtest/errors.hpp"

namespace threshtest {

namespace {

double block_max_norm(const Vector& z, const RowPartition& partition) {
  double best = 0.0;
  for (const auto& block : partition) {
    double sq = 0.0;
    for (Index i : block) sq += z(i) * z(i);
    best = std::max(best, std::sqrt(sq));
  }
  return best;
}

double sup_norm(const Vector& z) { return z.size() == 0 ? 0.0 : z.cwiseAbs().maxCoeff(); }

void check_design(const ReducedProblem& red, const DesignMatrix& x, const Vector& y) {
  if (y.size() != x.rows() || red.n() != x.rows() || red.p() != x.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "response/design do not match the reduction");
  }
}

struct FisherFactors {
  Eigen::ColPivHouseholderQR<Matrix> qr;
  Matrix weight;  // R_H
};

FisherFactors fisher_factors(const DesignMatrix& x, const LinearHypothesis& hyp) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (hyp.cols() != p) throw Error(ErrorKind::DimensionMismatch, "A columns != P");
  if (p >= n) {
    throw Error(ErrorKind::NotApplicable,
                "Fisher-weighted statistic needs P < N (P = " + std::to_string(p) +
                    ", N = " + std::to_string(n) + ")");
  }
  FisherFactors f{Eigen::ColPivHouseholderQR<Matrix>(x.values()), Matrix()};
  if (f.qr.rank() < p) {
    throw Error(ErrorKind::RankDeficient,
                "rank(X) = " + std::to_string(f.qr.rank()) + " < P = " + std::to_string(p));
  }
  // H = R^{-T} Pi^T A^T, so that A (X^T X)^{-1} A^T = H^T H = R_H^T R_H.
  const Matrix r_top = f.qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Matrix a_perm = hyp.a() * f.qr.colsPermutation();
  const Matrix h = r_top.transpose().triangularView<Eigen::Lower>().solve(a_perm.transpose());
  Eigen::HouseholderQR<Matrix> hqr(h);
  f.weight = hqr.matrixQR().topRows(hyp.rows()).template triangularView<Eigen::Upper>();
  return f;
}

FisherResult fisher_compute(const Eigen::ColPivHouseholderQR<Matrix>& qr, const Matrix& weight,
                            const DesignMatrix& x, const LinearHypothesis& hyp,
                            const Vector& y) {
  if (y.size() != x.rows()) throw Error(ErrorKind::DimensionMismatch, "y length != N");
  const Index n = x.rows();
  const Index p = x.cols();
  const Vector beta = qr.solve(y);
  const double rss = (y - x.values() * beta).squaredNorm();
  const Vector d = hyp.a() * beta - hyp.c();
  const Vector q = weight.transpose().triangularView<Eigen::Lower>().solve(d);
  FisherResult out;
  out.lambda0 = q.norm();
  out.df1 = hyp.rows();
  out.df2 = n - p;
  out.s2 = rss / static_cast<double>(n - p);
  out.f = out.lambda0 * out.lambda0 / (out.s2 * static_cast<double>(out.df1));
  return out;
}

}  // namespace

std::string_view to_string(StatFamily f) {
  switch (f) {
    case StatFamily::AffineLasso: return "affine_lasso";
    case StatFamily::AffineGroupLasso: return "affine_group_lasso";
    case StatFamily::SqrtAffineLasso: return "sqrt_affine_lasso";
    case StatFamily::SqrtAffineGroupLasso: return "sqrt_affine_group_lasso";
    case StatFamily::FisherWeighted: return "fisher_weighted";
    case StatFamily::LadSign: return "lad_sign";
    case StatFamily::GlmScoreSup: return "glm_score_sup";
    case StatFamily::GlmScoreGroup: return "glm_score_group";
  }
  return "unknown";
}

StatFamily parse_stat_family(std::string_view name) {
  for (auto f : {StatFamily::AffineLasso, StatFamily::AffineGroupLasso,
                 StatFamily::SqrtAffineLasso, StatFamily::SqrtAffineGroupLasso,
                 StatFamily::FisherWeighted, StatFamily::LadSign, StatFamily::GlmScoreSup,
                 StatFamily::GlmScoreGroup}) {
    if (to_string(f) == name) return f;
  }
  if (name == "lasso" || name == "sqrt_lasso") return StatFamily::SqrtAffineLasso;
  if (name == "group" || name == "sqrt_group") return StatFamily::SqrtAffineGroupLasso;
  if (name == "lad") return StatFamily::LadSign;
  if (name == "glm_sup") return StatFamily::GlmScoreSup;
  if (name == "glm_group") return StatFamily::GlmScoreGroup;
  throw Error(ErrorKind::InvalidSpec, "unknown statistic '" + std::string(name) + "'");
}

bool StatisticSpec::is_group() const noexcept {
  return family == StatFamily::AffineGroupLasso || family == StatFamily::SqrtAffineGroupLasso ||
         family == StatFamily::GlmScoreGroup;
}

bool StatisticSpec::is_glm() const noexcept {
  return family == StatFamily::GlmScoreSup || family == StatFamily::GlmScoreGroup;
}

bool StatisticSpec::is_exactly_pivotal() const noexcept {
  switch (family) {
    case StatFamily::SqrtAffineLasso:
    case StatFamily::SqrtAffineGroupLasso:
    case StatFamily::FisherWeighted:
    case StatFamily::LadSign:
      return true;
    default:
      return false;
  }
}

std::string StatisticSpec::id() const {
  std::ostringstream os;
  os << to_string(family);
  if (is_glm()) os << ':' << glm_family.name();
  if (is_group() && row_partition) {
    os << '{';
    for (std::size_t b = 0; b < row_partition->size(); ++b) {
      if (b) os << '|';
      const auto& block = (*row_partition)[b];
      for (std::size_t i = 0; i < block.size(); ++i) os << (i ? "," : "") << block[i];
    }
    os << '}';
  }
  return os.str();
}

StatValue zt_affine_lasso(const ReducedProblem& red, const DesignMatrix& x, const Vector& y) {
  check_design(red, x, y);
  return {sup_norm(red.multiplier(residual(red, x, y))), false};
}

StatValue zt_affine_group_lasso(const ReducedProblem& red, const DesignMatrix& x,
                                const Vector& y, const RowPartition& partition) {
  check_design(red, x, y);
  validate_partition(partition, red.r());
  return {block_max_norm(red.multiplier(residual(red, x, y)), partition), false};
}

StatValue zt_sqrt_variant(const ReducedProblem& red, const DesignMatrix& x, const Vector& y,
                          BaseNorm base, const RowPartition& partition) {
  check_design(red, x, y);
  if (base == BaseNorm::Group) validate_partition(partition, red.r());
  const Vector r = residual(red, x, y);
  const double rnorm = r.norm();
  if (rnorm == 0.0) return {0.0, true};
  const Vector z = red.multiplier(r);
  const double num = base == BaseNorm::Lasso ? sup_norm(z) : block_max_norm(z, partition);
  return {num / rnorm, false};
}

StatValue zt_fisher_weighted(const DesignMatrix& x, const LinearHypothesis& hyp,
                             const Vector& y) {
  return {fisher_F(x, hyp, y).lambda0, false};
}

FisherResult fisher_F(const DesignMatrix& x, const LinearHypothesis& hyp, const Vector& y) {
  const auto f = fisher_factors(x, hyp);
  return fisher_compute(f.qr, f.weight, x, hyp, y);
}

double median(Vector v) {
  if (v.size() == 0) throw Error(ErrorKind::DimensionMismatch, "median of empty vector");
  const auto n = static_cast<std::size_t>(v.size());
  double* data = v.data();
  std::nth_element(data, data + n / 2, data + n);
  const double upper = data[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(data, data + n / 2);
  return 0.5 * (lower + upper);
}

StatValue zt_lad(const Matrix& tested, const Vector& y, LadCenter center) {
  if (tested.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "X rows != y length");
  const double m = center == LadCenter::Median ? median(y) : 0.0;
  const Vector s = (y.array() - m).sign().matrix();
  return {sup_norm(tested.transpose() * s), false};
}

SignTestResult sign_test(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw Error(ErrorKind::DimensionMismatch, "u and v lengths differ");
  SignTestResult out;
  out.b = (v.array() > u.array()).count();
  out.lambda0 = std::abs(2 * out.b - v.size());
  return out;
}

StatValue glm_score_stat(const Matrix& tested, const Vector& y, const GlmFamily& family,
                         const std::optional<RowPartition>& groups) {
  if (tested.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "X rows != y length");
  const double xi = family.null_variance_estimate(y);
  const Vector centered = y.array() - y.mean();
  const Vector score = tested.transpose() * centered;
  const double num = groups ? block_max_norm(score, *groups) : sup_norm(score);
  if (!(xi > 0.0)) return {num, true};
  return {num / std::sqrt(static_cast<double>(y.size()) * xi), false};
}

Vector link_identity_residual(const GlmFamily& family, const Vector& grid) {
  Vector out(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const double d = family.pivotal_inverse_link_derivative(grid(i));
    out(i) = d * d - family.variance(family.pivotal_inverse_link(grid(i)));
  }
  return out;
}

PreparedStatistic::PreparedStatistic(StatisticSpec spec, DesignMatrix x, LinearHypothesis hyp)
    : spec_(std::move(spec)),
      x_(std::move(x)),
      hyp_(std::move(hyp)),
      red_(build_reduction(x_, hyp_)) {
  if (spec_.is_group()) {
    if (spec_.row_partition) {
      partition_ = *spec_.row_partition;
    } else if (hyp_.has_explicit_partition()) {
      partition_ = hyp_.partition();
    } else {
      partition_ = whole_partition(hyp_.rows());
    }
    validate_partition(partition_, hyp_.rows());
  } else {
    partition_ = singleton_partition(hyp_.rows());
  }

  if (spec_.family == StatFamily::FisherWeighted) {
    auto f = fisher_factors(x_, hyp_);
    x_qr_ = std::move(f.qr);
    fisher_weight_ = std::move(f.weight);
  }

  if (spec_.family == StatFamily::LadSign || spec_.is_glm()) {
    // A must be a row selection of all columns, or of all but the intercept.
    const Matrix& a = hyp_.a();
    std::vector<Index> cols;
    for (Index r = 0; r < a.rows(); ++r) {
      Index k = -1;
      for (Index j = 0; j < a.cols(); ++j) {
        if (a(r, j) == 1.0 && k < 0) {
          k = j;
        } else if (a(r, j) != 0.0) {
          k = -2;
          break;
        }
      }
      if (k < 0 || (!cols.empty() && k <= cols.back())) {
        throw Error(ErrorKind::NotApplicable,
                    std::string(to_string(spec_.family)) +
                        " needs a hypothesis that selects coefficients in column order");
      }
      cols.push_back(k);
    }
    const Index p = x_.cols();
    const Index r = a.rows();
    if (r == p) {
      intercept_free_ = false;
    } else if (r == p - 1 && x_.intercept_column()) {
      intercept_free_ = std::find(cols.begin(), cols.end(), *x_.intercept_column()) == cols.end();
    }
    if (r != p && !intercept_free_) {
      throw Error(ErrorKind::NotApplicable,
                  std::string(to_string(spec_.family)) +
                      " tests every coefficient except an optional all-ones intercept");
    }
    tested_.resize(x_.rows(), r);
    for (Index i = 0; i < r; ++i) tested_.col(i) = x_.values().col(cols[static_cast<std::size_t>(i)]);
    if (spec_.is_glm()) {
      if (!intercept_free_) {
        throw Error(ErrorKind::NotApplicable, "GLM score statistics need an untested intercept");
      }
      if (hyp_.c().cwiseAbs().maxCoeff() != 0.0) {
        throw Error(ErrorKind::NotApplicable, "GLM score statistics test beta = 0 only");
      }
    }
    x_beta_c_ = x_.values() * red_.beta_c();
  }
}

StatValue PreparedStatistic::evaluate(const Vector& y) const {
  if (y.size() != x_.rows()) throw Error(ErrorKind::DimensionMismatch, "y length != N");
  switch (spec_.family) {
    case StatFamily::AffineLasso:
      return {sup_norm(red_.multiplier(residual(red_, x_, y))), false};
    case StatFamily::AffineGroupLasso:
      return {block_max_norm(red_.multiplier(residual(red_, x_, y)), partition_), false};
    case StatFamily::SqrtAffineLasso:
      return zt_sqrt_variant(red_, x_, y, BaseNorm::Lasso, partition_);
    case StatFamily::SqrtAffineGroupLasso:
      return zt_sqrt_variant(red_, x_, y, BaseNorm::Group, partition_);
    case StatFamily::FisherWeighted: {
      const auto fr = fisher_compute(x_qr_, fisher_weight_, x_, hyp_, y);
      if (!(fr.s2 > 0.0)) return {fr.lambda0, true};
      return {fr.lambda0 / std::sqrt(fr.s2), false};
    }
    case StatFamily::LadSign:
      return zt_lad(tested_, y - x_beta_c_, intercept_free_ ? LadCenter::Median : LadCenter::None);
    case StatFamily::GlmScoreSup:
      return glm_score_stat(tested_, y, spec_.glm_family);
    case StatFamily::GlmScoreGroup:
      return glm_score_stat(tested_, y, spec_.glm_family, partition_);
  }
  return {};
}

PreparedStatistic PreparedStatistic::with_c(const Vector& c) const {
  PreparedStatistic out = *this;
  out.hyp_ = hyp_.with_c(c);
  out.red_ = red_.with_c(c);
  if (spec_.family == StatFamily::LadSign || spec_.is_glm()) {
    if (spec_.is_glm() && c.cwiseAbs().maxCoeff() != 0.0) {
      throw Error(ErrorKind::NotApplicable, "GLM score statistics test beta = 0 only");
    }
    out.x_beta_c_ = x_.values() * out.red_.beta_c();
  }
  return out;
}

}  // namespace threshtest
