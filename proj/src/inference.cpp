#include "threshtest/inference.hpp"

#include <sstream>

#include "threshtest/errors.hpp"
#include "threshtest/rng.hpp"

namespace threshtest {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidSpec, "alpha must lie in (0, 1)");
}

std::string degenerate_note_for(const StatisticSpec& spec) {
  if (spec.is_glm()) {
    return "degenerate: null variance estimate is zero (constant response); not rejected";
  }
  return "degenerate: residual vanished (response lies in the null fit space); not rejected";
}

}  // namespace

std::string fingerprint(const Matrix& m) {
  std::string bytes;
  const Index dims[2] = {m.rows(), m.cols()};
  bytes.append(reinterpret_cast<const char*>(dims), sizeof(dims));
  bytes.append(reinterpret_cast<const char*>(m.data()),
               static_cast<std::size_t>(m.size()) * sizeof(double));
  return sha256_hex(bytes);
}

NullModel default_null_model(const PreparedStatistic& stat, const Vector& y) {
  if (stat.spec().is_glm()) return NullModel::glm_plugin(stat.spec().glm_family, y);
  return NullModel::gaussian_pivotal(stat.reduction(), stat.design());
}

std::string calibration_key(const PreparedStatistic& stat, const NullModel& model,
                            const McConfig& mc, double alpha) {
  std::ostringstream os;
  os.precision(17);
  os << "X=" << fingerprint(stat.design().values()) << ";A=" << fingerprint(stat.hypothesis().a())
     << ";stat=" << stat.spec().id() << ";M=" << mc.m_draws << ";alpha=" << alpha
     << ";seed=" << mc.seed << ";model=" << model.key();
  const bool canonical =
      stat.spec().is_exactly_pivotal() && model.kind == NullKind::GaussianPivotal;
  if (!canonical && model.kind == NullKind::GaussianPivotal) {
    os << ";mean=" << fingerprint(model.mean);
  }
  if (stat.spec().family == StatFamily::FisherWeighted && mc.fisher_exact) os << ";exact";
  return os.str();
}

std::shared_ptr<const CalibrationResult> calibration_for(const PreparedStatistic& stat,
                                                         const NullModel& model, double alpha,
                                                         const McConfig& mc,
                                                         CalibrationCache* cache) {
  auto make = [&]() -> CalibrationResult {
    if (stat.spec().family == StatFamily::FisherWeighted && mc.fisher_exact) {
      const Index n = stat.design().rows();
      const Index p = stat.design().cols();
      return calibrate_fisher_exact(stat.hypothesis().rows(), n - p, alpha, stat.spec().id());
    }
    return calibrate(stat, model, mc.m_draws, alpha, mc.seed, mc.threads);
  };
  if (!cache) return std::make_shared<const CalibrationResult>(make());
  return cache->single.get_or_compute(calibration_key(stat, model, mc, alpha), make);
}

TestResult decide(const StatValue& observed, const CalibrationResult& cal) {
  TestResult out;
  out.observed = observed;
  out.lambda_alpha = cal.lambda_alpha;
  out.alpha = cal.alpha;
  out.statistic_id = cal.statistic_id;
  out.m_draws = cal.m_draws;
  out.seed = cal.seed;
  out.p_value = p_value(observed, cal, cal.statistic_id);
  out.reject = rejects(observed, cal.lambda_alpha);
  return out;
}

TestResult run_test(const Vector& y, const PreparedStatistic& stat, double alpha,
                    const McConfig& mc, CalibrationCache* cache) {
  check_alpha(alpha);
  if (y.size() != stat.design().rows()) throw Error(ErrorKind::DimensionMismatch, "y length != N");
  if (stat.spec().is_glm()) stat.spec().glm_family.check_support(y);
  const NullModel model = default_null_model(stat, y);
  const auto cal = calibration_for(stat, model, alpha, mc, cache);
  TestResult out = decide(stat.evaluate(y), *cal);
  if (out.observed.degenerate) out.degenerate_note = degenerate_note_for(stat.spec());
  return out;
}

TestResult run_test(const Vector& y, const DesignMatrix& x, const LinearHypothesis& hyp,
                    const StatisticSpec& stat, double alpha, const McConfig& mc,
                    CalibrationCache* cache) {
  return run_test(y, PreparedStatistic(stat, x, hyp), alpha, mc, cache);
}

std::string composite_id(const StatisticSpec& s1, const StatisticSpec& s2) {
  return "oplus(" + s1.id() + "," + s2.id() + ")";
}

std::shared_ptr<const CompositeCalibration> composite_calibration_for(
    const PreparedStatistic& stat1, const PreparedStatistic& stat2, const NullModel& model,
    double alpha, const McConfig& mc, CalibrationCache* cache) {
  auto make = [&] {
    return calibrate_composite(stat1, stat2, model, mc.m_draws, alpha, mc.seed, mc.threads);
  };
  if (!cache) return std::make_shared<const CompositeCalibration>(make());
  const std::string key = "composite;" + calibration_key(stat1, model, mc, alpha) + ";with=" +
                          stat2.spec().id() + ";A2=" + fingerprint(stat2.hypothesis().a());
  return cache->composite.get_or_compute(key, make);
}

TestResult decide_composite(const StatValue& v1, const StatValue& v2,
                            const CompositeCalibration& cal, const std::string& statistic_id) {
  TestResult out;
  out.observed = composite_value(v1, v2, cal.cal_1.lambda_alpha, cal.cal_2.lambda_alpha);
  out.lambda_alpha = cal.kappa_alpha;
  out.alpha = cal.alpha;
  out.statistic_id = statistic_id;
  out.m_draws = cal.m_draws;
  out.seed = cal.seed;
  out.p_value = composite_p_value(out.observed, cal);
  out.reject = rejects(out.observed, cal.kappa_alpha);
  return out;
}

TestResult run_composite(const Vector& y, const PreparedStatistic& stat1,
                         const PreparedStatistic& stat2, double alpha, const McConfig& mc,
                         CalibrationCache* cache) {
  check_alpha(alpha);
  if (stat1.spec().is_glm() != stat2.spec().is_glm()) {
    throw Error(ErrorKind::NotApplicable,
                "composite components must share a null model (both GLM or both linear)");
  }
  if (stat1.design().rows() != y.size() || stat2.design().rows() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "y length != N");
  }
  if (stat1.spec().is_glm()) stat1.spec().glm_family.check_support(y);
  const NullModel model = default_null_model(stat1, y);
  const auto cal = composite_calibration_for(stat1, stat2, model, alpha, mc, cache);
  TestResult out = decide_composite(stat1.evaluate(y), stat2.evaluate(y), *cal,
                                    composite_id(stat1.spec(), stat2.spec()));
  if (out.observed.degenerate) out.degenerate_note = degenerate_note_for(stat1.spec());
  return out;
}

TestResult run_composite(const Vector& y, const DesignMatrix& x, const LinearHypothesis& hyp,
                         double alpha, const McConfig& mc, CalibrationCache* cache) {
  StatisticSpec lasso{StatFamily::SqrtAffineLasso, std::nullopt, GlmFamily{}};
  StatisticSpec group{StatFamily::SqrtAffineGroupLasso, whole_partition(hyp.rows()), GlmFamily{}};
  return run_composite(y, PreparedStatistic(lasso, x, hyp), PreparedStatistic(group, x, hyp),
                       alpha, mc, cache);
}

ConfidenceRegion::ConfidenceRegion(Vector y, DesignMatrix x, Matrix a, StatisticSpec stat,
                                   double lambda_alpha)
    : y_(std::move(y)),
      base_([&] {
        if (!stat.is_exactly_pivotal() || stat.is_glm()) {
          throw Error(ErrorKind::NotApplicable,
                      "confidence regions need a statistic whose null law is free of c "
                      "(square-root, Fisher-weighted or LAD families)");
        }
        const Index r = a.rows();
        return PreparedStatistic(std::move(stat), std::move(x),
                                 LinearHypothesis(std::move(a), Vector::Zero(r)));
      }()),
      lambda_alpha_(lambda_alpha) {
  if (y_.size() != base_.design().rows()) throw Error(ErrorKind::DimensionMismatch, "y length != N");
}

StatValue ConfidenceRegion::lambda_cr(const Vector& c) const {
  return base_.with_c(c).evaluate(y_);
}

bool ConfidenceRegion::contains(const Vector& c) const {
  const StatValue v = lambda_cr(c);
  // Degenerate values are never rejected, so they stay in the region.
  return v.degenerate || v.value <= lambda_alpha_;
}

bool cr_member(const Vector& c, const Vector& y, const DesignMatrix& x, const Matrix& a,
               const StatisticSpec& stat, double lambda_alpha) {
  return ConfidenceRegion(y, x, a, stat, lambda_alpha).contains(c);
}

CrGridResult cr_grid(const ConfidenceRegion& region, const CrLattice& lattice) {
  const Index r = region.hypothesis_matrix().rows();
  if (r > 2) {
    throw Error(ErrorKind::UnsupportedDimension,
                "lattice confidence regions support R <= 2 (R = " + std::to_string(r) + ")");
  }
  if (r == 2 && lattice.axis2.empty() && !lattice.axis1.empty()) {
    throw Error(ErrorKind::InvalidSpec, "R = 2 lattice needs two axes");
  }
  if (r == 1 && !lattice.axis2.empty()) {
    throw Error(ErrorKind::InvalidSpec, "R = 1 lattice takes a single axis");
  }
  CrGridResult out;
  auto visit = [&](Vector c) {
    out.member.push_back(region.contains(c));
    out.points.push_back(std::move(c));
  };
  for (double c1 : lattice.axis1) {
    if (r == 1) {
      visit(Vector::Constant(1, c1));
    } else {
      for (double c2 : lattice.axis2) visit((Vector(2) << c1, c2).finished());
    }
  }
  if (r == 1) {
    for (std::size_t i = 0; i < out.member.size(); ++i) {
      if (!out.member[i]) continue;
      const double c = out.points[i](0);
      if (!out.interval) {
        out.interval = std::make_pair(c, c);
      } else {
        out.interval->first = std::min(out.interval->first, c);
        out.interval->second = std::max(out.interval->second, c);
      }
    }
  }
  return out;
}

CrGridResult cr_grid(const Vector& y, const DesignMatrix& x, const Matrix& a,
                     const StatisticSpec& stat, double lambda_alpha, const CrLattice& lattice) {
  return cr_grid(ConfidenceRegion(y, x, a, stat, lambda_alpha), lattice);
}

}  // namespace threshtest
