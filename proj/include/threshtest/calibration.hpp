#pragma once

// Monte-Carlo calibration of null-thresholding statistics: simulate Y0 under
// H0, evaluate the statistic on every draw, and read the test-threshold off
// the order statistics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "threshtest/family.hpp"
#include "threshtest/hypothesis.hpp"
#include "threshtest/rng.hpp"
#include "threshtest/statistics.hpp"

namespace threshtest {

enum class NullKind { GaussianPivotal, GlmPlugin };

struct NullModel {
  NullKind kind = NullKind::GaussianPivotal;
  Vector mean;               // X beta_c (gaussian) or the plug-in mean repeated (glm)
  double noise_scale = 1.0;  // gaussian only
  GlmFamily family{FamilyTag::Gaussian};
  double plugin_mean = 0.0;  // h(beta0-hat) = ybar, clipped for bernoulli/poisson
  double beta0_hat = 0.0;    // canonical-scale plug-in intercept

  /// Y0 = X beta_c + noise_scale * E, E standard normal.
  static NullModel gaussian_pivotal(const ReducedProblem& red, const DesignMatrix& x,
                                    double noise_scale = 1.0);

  /// i.i.d. responses at mean ybar of the observed sample. Bernoulli and
  /// poisson means are clipped into [1/(2N), 1 - 1/(2N)] and [1/(2N), inf).
  /// The gaussian plug-in uses the sample standard deviation as scale.
  static NullModel glm_plugin(const GlmFamily& family, const Vector& y_observed);

  Index n() const noexcept { return mean.size(); }
  /// Short description used in cache keys.
  std::string key() const;
};

Vector simulate_null(const NullModel& model, Engine& eng);

/// Order-statistic index k = ceil((M + 1)(1 - alpha)), 1-based. Throws
/// InsufficientDraws when k > M, i.e. M < ceil(1/alpha) - 1.
std::size_t threshold_rank(std::size_t m_draws, double alpha);

/// Exact null reference: Lambda0^2 / R ~ F(df1, df2) for the studentized
/// Fisher-weighted statistic.
struct FisherReference {
  Index df1 = 0;
  Index df2 = 0;
};

struct CalibrationResult {
  std::vector<double> sorted_null_stats;
  double lambda_alpha = 0.0;
  double alpha = 0.05;
  std::size_t m_draws = 0;
  std::uint64_t seed = 0;
  std::string statistic_id;
  std::size_t n_degenerate = 0;
  std::optional<FisherReference> exact;
};

struct McConfig {
  std::size_t m_draws = 2000;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Use the exact F reference for FisherWeighted instead of simulating.
  bool fisher_exact = true;
};

/// Builds a CalibrationResult from raw draws (sorted here).
CalibrationResult calibration_from_draws(std::vector<double> draws, double alpha,
                                         std::uint64_t seed, std::string statistic_id,
                                         std::size_t n_degenerate = 0);

/// Simulates M null statistics. Degenerate draws are recorded as 0, the
/// value the test itself assigns them (never reject). For exactly pivotal
/// statistics under the gaussian model, draws are taken at beta_c = 0 and
/// unit scale, so the result does not depend on the shift or the scale.
CalibrationResult calibrate(const PreparedStatistic& stat, const NullModel& model,
                            std::size_t m_draws, double alpha, std::uint64_t seed,
                            int threads = 1);

/// Threshold sqrt(R * F^{-1}_{R, N-P}(1 - alpha)) for the studentized
/// Fisher-weighted statistic.
CalibrationResult calibrate_fisher_exact(Index df1, Index df2, double alpha,
                                         std::string statistic_id);

/// p = (1 + #{m : Lambda0^(m) >= observed}) / (M + 1); 1 for degenerate
/// observations. Throws StatisticMismatch when ids differ.
double p_value(const StatValue& observed, const CalibrationResult& cal,
               const std::string& statistic_id);

/// Strict rejection rule: observed > lambda_alpha, never on degenerate values.
bool rejects(const StatValue& observed, double lambda_alpha);

struct CompositeCalibration {
  CalibrationResult cal_1;
  CalibrationResult cal_2;
  /// Composite values of the independent second batch, ascending.
  std::vector<double> sorted_composite;
  double kappa_alpha = 0.0;
  double alpha = 0.05;
  std::size_t m_draws = 0;
  std::uint64_t seed = 0;
};

/// max(lambda0^(1) / lambda_alpha^(1), lambda0^(2) / lambda_alpha^(2)).
StatValue composite_value(const StatValue& v1, const StatValue& v2, double lambda_alpha_1,
                          double lambda_alpha_2);

/// Batch 1 (shared draws) calibrates both components; an independent batch 2
/// calibrates the composite statistic.
CompositeCalibration calibrate_composite(const PreparedStatistic& stat1,
                                         const PreparedStatistic& stat2,
                                         const NullModel& model, std::size_t m_draws,
                                         double alpha, std::uint64_t seed, int threads = 1);

/// Composite p-value against batch 2.
double composite_p_value(const StatValue& observed, const CompositeCalibration& cal);

}  // namespace threshtest
