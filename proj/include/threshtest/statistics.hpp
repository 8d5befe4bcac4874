#pragma once

// Zero-thresholding statistics: the smallest penalty at which the
// corresponding lasso-family estimator sets A beta - c exactly to zero,
// written in closed form so no estimator ever has to be fitted.

#include <optional>
#include <string>
#include <string_view>

#include "threshtest/family.hpp"
#include "threshtest/hypothesis.hpp"

namespace threshtest {

enum class StatFamily {
  AffineLasso,
  AffineGroupLasso,
  SqrtAffineLasso,
  SqrtAffineGroupLasso,
  FisherWeighted,
  LadSign,
  GlmScoreSup,
  GlmScoreGroup,
};

std::string_view to_string(StatFamily f);
StatFamily parse_stat_family(std::string_view name);

struct StatisticSpec {
  StatFamily family = StatFamily::SqrtAffineLasso;
  /// Group families only. Unset means: the hypothesis' explicit partition if
  /// it has one, else a single block.
  std::optional<RowPartition> row_partition;
  /// GLM families only.
  GlmFamily glm_family{FamilyTag::Gaussian};

  bool is_group() const noexcept;
  bool is_glm() const noexcept;
  /// Null distribution free of (beta, sigma) under the gaussian linear model.
  bool is_exactly_pivotal() const noexcept;
  /// Stable fingerprint, e.g. "sqrt_affine_group_lasso{0,1|2}".
  std::string id() const;
};

struct StatValue {
  double value = 0.0;
  bool degenerate = false;
};

/// || (A A^T)^{-1} A X^T r ||_inf
StatValue zt_affine_lasso(const ReducedProblem& red, const DesignMatrix& x, const Vector& y);

/// max_l || [(A A^T)^{-1} A X^T r]^{H_l} ||_2
StatValue zt_affine_group_lasso(const ReducedProblem& red, const DesignMatrix& x,
                                const Vector& y, const RowPartition& partition);

enum class BaseNorm { Lasso, Group };

/// Base statistic divided by ||r||_2; degenerate when r = 0.
StatValue zt_sqrt_variant(const ReducedProblem& red, const DesignMatrix& x, const Vector& y,
                          BaseNorm base, const RowPartition& partition);

struct FisherResult {
  double lambda0 = 0.0;  // lambda0^2 = RSS_H0 - RSS
  double f = 0.0;
  Index df1 = 0;
  Index df2 = 0;
  double s2 = 0.0;  // RSS / (N - P)
};

/// Zero-thresholding statistic of the Q-weighted affine group lasso with
/// Q = {A (X^T X)^{-1} A^T}^{-1}; throws NotApplicable when P >= N and
/// RankDeficient when rank(X) < P.
StatValue zt_fisher_weighted(const DesignMatrix& x, const LinearHypothesis& hyp, const Vector& y);
FisherResult fisher_F(const DesignMatrix& x, const LinearHypothesis& hyp, const Vector& y);

enum class LadCenter { None, Median };

/// Sample median; midpoint of the central order statistics for even length.
double median(Vector v);

/// || X^T sign(y - m 1) ||_inf with m = 0 or the sample median; sign(0) = 0.
/// `tested` holds only the tested columns.
StatValue zt_lad(const Matrix& tested, const Vector& y, LadCenter center);

struct SignTestResult {
  Index b = 0;        // #{n : v_n > u_n}
  Index lambda0 = 0;  // |2B - N|
};

SignTestResult sign_test(const Vector& u, const Vector& v);

/// ||X^T (y - ybar 1)|| / sqrt(N xi-hat), sup norm when `groups` is empty,
/// otherwise the max of group 2-norms over column blocks. Degenerate when
/// xi-hat = 0.
StatValue glm_score_stat(const Matrix& tested, const Vector& y, const GlmFamily& family,
                         const std::optional<RowPartition>& groups = std::nullopt);

/// {h'(x)}^2 - V(h(x)) pointwise over the grid for the pivotal inverse link.
Vector link_identity_residual(const GlmFamily& family, const Vector& grid);

/// Statistic bound to a design and hypothesis with everything that does not
/// depend on y precomputed. `evaluate` is const and thread-safe.
///
/// FisherWeighted evaluates the studentized form lambda0 / S2, whose null
/// law is sqrt(R F_{R, N-P}); the other families evaluate the functions
/// above. LadSign and the GLM families require A to select every column
/// except (optionally) the intercept.
class PreparedStatistic {
 public:
  PreparedStatistic(StatisticSpec spec, DesignMatrix x, LinearHypothesis hyp);

  StatValue evaluate(const Vector& y) const;

  const StatisticSpec& spec() const noexcept { return spec_; }
  const DesignMatrix& design() const noexcept { return x_; }
  const LinearHypothesis& hypothesis() const noexcept { return hyp_; }
  const ReducedProblem& reduction() const noexcept { return red_; }
  const RowPartition& partition() const noexcept { return partition_; }

  /// Same statistic for H0: A beta = c'.
  PreparedStatistic with_c(const Vector& c) const;

 private:
  StatisticSpec spec_;
  DesignMatrix x_;
  LinearHypothesis hyp_;
  ReducedProblem red_;
  RowPartition partition_;

  // FisherWeighted
  Eigen::ColPivHouseholderQR<Matrix> x_qr_;
  Matrix fisher_weight_;  // upper-triangular R_H with A (X^T X)^{-1} A^T = R_H^T R_H

  // LadSign / GLM: tested columns and whether the intercept is free.
  Matrix tested_;
  bool intercept_free_ = false;
  Vector x_beta_c_;
};

}  // namespace threshtest
