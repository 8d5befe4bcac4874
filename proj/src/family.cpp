#include "threshtest/family.hpp"

#include <cmath>
#include <numbers>

#include "threshtest/errors.hpp"

namespace threshtest {

std::string_view to_string(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::Gaussian: return "gaussian";
    case FamilyTag::Bernoulli: return "bernoulli";
    case FamilyTag::Poisson: return "poisson";
  }
  return "unknown";
}

FamilyTag parse_family(std::string_view name) {
  if (name == "gaussian") return FamilyTag::Gaussian;
  if (name == "bernoulli" || name == "binomial") return FamilyTag::Bernoulli;
  if (name == "poisson") return FamilyTag::Poisson;
  throw Error(ErrorKind::InvalidSpec, "unknown family '" + std::string(name) + "'");
}

double GlmFamily::variance(double mu) const {
  switch (tag_) {
    case FamilyTag::Gaussian: return 1.0;
    case FamilyTag::Bernoulli: return mu * (1.0 - mu);
    case FamilyTag::Poisson: return mu;
  }
  return 1.0;
}

double GlmFamily::canonical_inverse_link(double eta) const {
  switch (tag_) {
    case FamilyTag::Gaussian: return eta;
    case FamilyTag::Bernoulli: return 1.0 / (1.0 + std::exp(-eta));
    case FamilyTag::Poisson: return std::exp(eta);
  }
  return eta;
}

bool GlmFamily::in_pivotal_domain(double x) const {
  switch (tag_) {
    case FamilyTag::Gaussian: return std::isfinite(x);
    case FamilyTag::Bernoulli: return std::abs(x) <= std::numbers::pi / 2;
    case FamilyTag::Poisson: return x >= 0.0 && std::isfinite(x);
  }
  return false;
}

double GlmFamily::pivotal_inverse_link(double x) const {
  if (!in_pivotal_domain(x)) {
    throw Error(ErrorKind::DomainError, "x = " + std::to_string(x) +
                                            " outside the pivotal link domain of " +
                                            std::string(name()));
  }
  switch (tag_) {
    case FamilyTag::Gaussian: return x;
    case FamilyTag::Bernoulli: return (std::sin(x) + 1.0) / 2.0;
    case FamilyTag::Poisson: return x * x / 4.0;
  }
  return x;
}

double GlmFamily::pivotal_inverse_link_derivative(double x) const {
  if (!in_pivotal_domain(x)) {
    throw Error(ErrorKind::DomainError, "x = " + std::to_string(x) +
                                            " outside the pivotal link domain of " +
                                            std::string(name()));
  }
  switch (tag_) {
    case FamilyTag::Gaussian: return 1.0;
    case FamilyTag::Bernoulli: return std::cos(x) / 2.0;
    case FamilyTag::Poisson: return x / 2.0;
  }
  return 1.0;
}

double GlmFamily::null_variance_estimate(const Vector& y) const {
  const double ybar = y.mean();
  switch (tag_) {
    case FamilyTag::Gaussian: {
      if (y.size() < 2) return 0.0;
      return (y.array() - ybar).square().sum() / static_cast<double>(y.size() - 1);
    }
    case FamilyTag::Bernoulli: return ybar * (1.0 - ybar);
    case FamilyTag::Poisson: return ybar;
  }
  return 0.0;
}

void GlmFamily::check_support(const Vector& y) const {
  for (Index i = 0; i < y.size(); ++i) {
    const double v = y(i);
    bool ok = std::isfinite(v);
    if (tag_ == FamilyTag::Bernoulli) ok = ok && (v == 0.0 || v == 1.0);
    if (tag_ == FamilyTag::Poisson) ok = ok && v >= 0.0 && v == std::floor(v);
    if (!ok) {
      throw Error(ErrorKind::DomainError, "response value " + std::to_string(v) + " at row " +
                                              std::to_string(i) + " outside " +
                                              std::string(name()) + " support");
    }
  }
}

}  // namespace threshtest
