#pragma once

#include <string>
#include <string_view>

#include "threshtest/hypothesis.hpp"

namespace threshtest {

enum class FamilyTag { Gaussian, Bernoulli, Poisson };

std::string_view to_string(FamilyTag tag);
FamilyTag parse_family(std::string_view name);

/// Exponential-family response model. The gaussian dispersion sigma^2 is an
/// unknown nuisance; `dispersion()` returns 1 for it and callers estimate
/// the scale through `null_variance_estimate`.
class GlmFamily {
 public:
  explicit GlmFamily(FamilyTag tag = FamilyTag::Gaussian) : tag_(tag) {}

  FamilyTag tag() const noexcept { return tag_; }
  std::string_view name() const noexcept { return to_string(tag_); }

  double variance(double mu) const;
  double dispersion() const noexcept { return 1.0; }

  /// Inverse of the canonical link (identity / logistic / exp).
  double canonical_inverse_link(double eta) const;

  /// Inverse link h with {h'(x)}^2 = V(h(x)): x, x^2/4 (x >= 0),
  /// (sin x + 1)/2 (|x| <= pi/2). Throws DomainError outside the domain.
  double pivotal_inverse_link(double x) const;
  double pivotal_inverse_link_derivative(double x) const;
  bool in_pivotal_domain(double x) const;

  /// xi-hat from the sample: unbiased sample variance (gaussian), ybar
  /// (poisson), ybar (1 - ybar) (bernoulli).
  double null_variance_estimate(const Vector& y) const;

  /// Throws DomainError when y is outside the family support.
  void check_support(const Vector& y) const;

 private:
  FamilyTag tag_;
};

}  // namespace threshtest
