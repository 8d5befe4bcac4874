#pragma once

// Power and level experiments: random designs, sparse/dense alternatives,
// GLM responses through the canonical link, and the classical F and
// likelihood-ratio baselines.

#include <cstdint>
#include <string>
#include <vector>

#include "threshtest/family.hpp"
#include "threshtest/hypothesis.hpp"
#include "threshtest/inference.hpp"
#include "threshtest/rng.hpp"

namespace threshtest {

enum class CovarianceKind { Identity, Ar1 };

struct DesignSpec {
  CovarianceKind covariance = CovarianceKind::Ar1;
  double rho = 0.5;
  bool standardize = true;
  bool intercept = true;
};

/// Rows i.i.d. N(0, Sigma) with Sigma_ij = rho^|i-j| (or I); optional
/// column standardization; optional leading all-ones intercept column.
DesignMatrix gen_design(Index n, Index p, const DesignSpec& spec, Engine& eng);

struct AlternativeSpec {
  Index s = 0;
  double theta = 0.0;
};

/// theta * pi((+-1, ..., +-1, 0, ..., 0)) with s random-sign entries at
/// uniformly permuted positions.
Vector gen_beta(const AlternativeSpec& alt, Index p, Engine& eng);

/// Responses with mean h(beta0 + X beta), h the canonical inverse link;
/// gaussian noise has unit scale. `covariates` excludes the intercept.
Vector gen_response(const Matrix& covariates, double beta0, const Vector& beta,
                    const GlmFamily& family, Engine& eng);

/// Classical F-test of H0: A beta = c from two least-squares fits.
TestResult baseline_f_test(const Vector& y, const DesignMatrix& x, const LinearHypothesis& hyp,
                           double alpha);

struct GlmFit {
  Vector beta;
  double deviance = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Iteratively reweighted least squares with the canonical link; gaussian
/// deviance uses unit dispersion.
GlmFit fit_glm_irls(const Matrix& x, const Vector& y, const GlmFamily& family,
                    double tol = 1e-8, std::size_t max_iter = 100);

/// Deviance of the intercept-only model.
double null_deviance(const Vector& y, const GlmFamily& family);

/// Likelihood-ratio test that every non-intercept coefficient is zero,
/// referred to chi^2 with (P - 1) degrees of freedom.
TestResult baseline_lrt(const Vector& y, const DesignMatrix& x, const GlmFamily& family,
                        double alpha);

struct ExperimentConfig {
  Index n = 100;
  Index p = 10;
  GlmFamily family{FamilyTag::Gaussian};
  double beta0 = -2.0;
  double alpha = 0.05;
  std::size_t m_calib = 2000;
  std::size_t n_reps = 1000;
  std::vector<double> theta_grid{0.0};
  std::vector<Index> s_values{1};
  DesignSpec design;
  /// Method names: lasso, group, oplus, lad, fisher_weighted (gaussian);
  /// glm_sup, glm_group, glm_oplus (any family); fisher, lrt (baselines).
  std::vector<std::string> methods;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Methods compared for a family when the config leaves `methods` empty.
std::vector<std::string> default_methods(FamilyTag family, Index n, Index p);

struct PowerRow {
  std::string statistic_id;
  std::string family;
  Index s = 0;
  double theta = 0.0;
  double power_estimate = 0.0;
  double mc_standard_error = 0.0;
  std::size_t n_reps = 0;
  std::string status = "ok";
};

struct PowerTable {
  std::vector<PowerRow> rows;
  /// Soft monotonicity violations (power dropping by more than 2 standard
  /// errors as theta grows); reported, never fatal.
  std::vector<std::string> warnings;
};

PowerTable estimate_power(const ExperimentConfig& cfg);

/// estimate_power restricted to theta = 0.
PowerTable estimate_level(const ExperimentConfig& cfg);

}  // namespace threshtest
