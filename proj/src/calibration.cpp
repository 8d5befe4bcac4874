#include "threshtest/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>

#include "threshtest/errors.hpp"
#include "threshtest/parallel.hpp"

namespace threshtest {

namespace {

constexpr std::uint64_t kStreamBatch1 = 1;
constexpr std::uint64_t kStreamBatch2 = 2;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "alpha must lie in (0, 1)");
  }
}

// Evaluates `stat` on draw m of `stream`, mapping degenerate values to 0.
struct DrawEvaluator {
  const PreparedStatistic* stat;
  NullModel model;

  StatValue operator()(std::uint64_t seed, std::uint64_t stream, std::size_t m) const {
    Engine eng = substream(seed, stream, m);
    return stat->evaluate(simulate_null(model, eng));
  }
};

// Pivotal statistics are evaluated on the standardized null (beta_c = 0,
// unit scale); non-pivotal ones on the model as given.
bool canonicalize(const PreparedStatistic& stat, const NullModel& model) {
  return stat.spec().is_exactly_pivotal() && model.kind == NullKind::GaussianPivotal;
}

NullModel canonical_model(const NullModel& model) {
  NullModel out = model;
  out.mean = Vector::Zero(model.n());
  out.noise_scale = 1.0;
  return out;
}

}  // namespace

NullModel NullModel::gaussian_pivotal(const ReducedProblem& red, const DesignMatrix& x,
                                      double noise_scale) {
  if (x.rows() != red.n() || x.cols() != red.p()) {
    throw Error(ErrorKind::DimensionMismatch, "design does not match the reduction");
  }
  if (!(noise_scale > 0.0)) throw Error(ErrorKind::InvalidSpec, "noise_scale must be positive");
  NullModel m;
  m.kind = NullKind::GaussianPivotal;
  m.mean = x.values() * red.beta_c();
  m.noise_scale = noise_scale;
  return m;
}

NullModel NullModel::glm_plugin(const GlmFamily& family, const Vector& y_observed) {
  const Index n = y_observed.size();
  if (n < 2) throw Error(ErrorKind::DimensionMismatch, "need at least two observations");
  family.check_support(y_observed);
  NullModel m;
  m.kind = NullKind::GlmPlugin;
  m.family = family;
  const double ybar = y_observed.mean();
  const double floor_mean = 1.0 / (2.0 * static_cast<double>(n));
  switch (family.tag()) {
    case FamilyTag::Bernoulli:
      m.plugin_mean = std::clamp(ybar, floor_mean, 1.0 - floor_mean);
      m.beta0_hat = std::log(m.plugin_mean / (1.0 - m.plugin_mean));
      break;
    case FamilyTag::Poisson:
      m.plugin_mean = std::max(ybar, floor_mean);
      m.beta0_hat = std::log(m.plugin_mean);
      break;
    case FamilyTag::Gaussian: {
      m.plugin_mean = ybar;
      m.beta0_hat = ybar;
      const double sd = std::sqrt(family.null_variance_estimate(y_observed));
      m.noise_scale = sd > 0.0 ? sd : 1.0;
      break;
    }
  }
  m.mean = Vector::Constant(n, m.plugin_mean);
  return m;
}

std::string NullModel::key() const {
  std::ostringstream os;
  os.precision(17);
  if (kind == NullKind::GaussianPivotal) {
    os << "gaussian_pivotal(n=" << n() << ",scale=" << noise_scale << ")";
  } else {
    os << "glm_plugin(" << family.name() << ",n=" << n() << ",mean=" << plugin_mean
       << ",scale=" << noise_scale << ")";
  }
  return os.str();
}

Vector simulate_null(const NullModel& model, Engine& eng) {
  const Index n = model.n();
  Vector y(n);
  if (model.kind == NullKind::GaussianPivotal || model.family.tag() == FamilyTag::Gaussian) {
    for (Index i = 0; i < n; ++i) y(i) = model.mean(i) + model.noise_scale * draw_normal(eng);
    return y;
  }
  if (model.family.tag() == FamilyTag::Bernoulli) {
    for (Index i = 0; i < n; ++i) y(i) = draw_bernoulli(eng, model.mean(i));
  } else {
    for (Index i = 0; i < n; ++i) y(i) = draw_poisson(eng, model.mean(i));
  }
  return y;
}

std::size_t threshold_rank(std::size_t m_draws, double alpha) {
  check_alpha(alpha);
  if (m_draws == 0) throw Error(ErrorKind::InsufficientDraws, "M must be positive");
  const double t = static_cast<double>(m_draws + 1) * (1.0 - alpha);
  // Guard against (M + 1)(1 - alpha) landing a few ulps above an integer.
  const auto k = static_cast<std::size_t>(std::ceil(t - 1e-9 * t));
  if (k > m_draws) {
    const auto needed = static_cast<std::size_t>(std::ceil(1.0 / alpha - 1e-12)) - 1;
    throw Error(ErrorKind::InsufficientDraws,
                "M = " + std::to_string(m_draws) + " draws cannot calibrate alpha = " +
                    std::to_string(alpha) + "; need M >= " + std::to_string(needed));
  }
  return std::max<std::size_t>(k, 1);
}

CalibrationResult calibration_from_draws(std::vector<double> draws, double alpha,
                                         std::uint64_t seed, std::string statistic_id,
                                         std::size_t n_degenerate) {
  const std::size_t k = threshold_rank(draws.size(), alpha);
  std::sort(draws.begin(), draws.end());
  CalibrationResult out;
  out.lambda_alpha = draws[k - 1];
  out.sorted_null_stats = std::move(draws);
  out.alpha = alpha;
  out.m_draws = out.sorted_null_stats.size();
  out.seed = seed;
  out.statistic_id = std::move(statistic_id);
  out.n_degenerate = n_degenerate;
  return out;
}

CalibrationResult calibrate(const PreparedStatistic& stat, const NullModel& model,
                            std::size_t m_draws, double alpha, std::uint64_t seed,
                            int threads) {
  threshold_rank(m_draws, alpha);
  if (model.n() != stat.design().rows()) {
    throw Error(ErrorKind::DimensionMismatch, "null model size != N");
  }
  const bool canon = canonicalize(stat, model);
  const PreparedStatistic canonical =
      canon ? stat.with_c(Vector::Zero(stat.hypothesis().rows())) : stat;
  const DrawEvaluator eval{&canonical, canon ? canonical_model(model) : model};

  std::vector<double> draws(m_draws);
  std::vector<char> degenerate(m_draws, 0);
  parallel_for(m_draws, resolve_threads(threads), [&](std::size_t m) {
    const StatValue v = eval(seed, kStreamBatch1, m);
    degenerate[m] = v.degenerate;
    draws[m] = v.degenerate ? 0.0 : v.value;
  });
  const auto n_deg = static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
  return calibration_from_draws(std::move(draws), alpha, seed, stat.spec().id(), n_deg);
}

CalibrationResult calibrate_fisher_exact(Index df1, Index df2, double alpha,
                                         std::string statistic_id) {
  check_alpha(alpha);
  if (df1 < 1 || df2 < 1) throw Error(ErrorKind::NotApplicable, "F reference needs df >= 1");
  boost::math::fisher_f_distribution<double> dist(static_cast<double>(df1),
                                                  static_cast<double>(df2));
  CalibrationResult out;
  out.lambda_alpha = std::sqrt(static_cast<double>(df1) * boost::math::quantile(dist, 1.0 - alpha));
  out.alpha = alpha;
  out.statistic_id = std::move(statistic_id);
  out.exact = FisherReference{df1, df2};
  return out;
}

double p_value(const StatValue& observed, const CalibrationResult& cal,
               const std::string& statistic_id) {
  if (statistic_id != cal.statistic_id) {
    throw Error(ErrorKind::StatisticMismatch, "observed statistic '" + statistic_id +
                                                  "' vs calibration '" + cal.statistic_id + "'");
  }
  if (observed.degenerate) return 1.0;
  if (cal.exact) {
    boost::math::fisher_f_distribution<double> dist(static_cast<double>(cal.exact->df1),
                                                    static_cast<double>(cal.exact->df2));
    const double f = observed.value * observed.value / static_cast<double>(cal.exact->df1);
    return boost::math::cdf(boost::math::complement(dist, f));
  }
  const auto& s = cal.sorted_null_stats;
  const auto at_least = static_cast<double>(s.end() - std::lower_bound(s.begin(), s.end(), observed.value));
  return (1.0 + at_least) / static_cast<double>(s.size() + 1);
}

bool rejects(const StatValue& observed, double lambda_alpha) {
  return !observed.degenerate && observed.value > lambda_alpha;
}

StatValue composite_value(const StatValue& v1, const StatValue& v2, double lambda_alpha_1,
                          double lambda_alpha_2) {
  if (!(lambda_alpha_1 > 0.0) || !(lambda_alpha_2 > 0.0)) {
    throw Error(ErrorKind::Degenerate, "composite test needs positive component thresholds");
  }
  if (v1.degenerate || v2.degenerate) return {0.0, true};
  return {std::max(v1.value / lambda_alpha_1, v2.value / lambda_alpha_2), false};
}

CompositeCalibration calibrate_composite(const PreparedStatistic& stat1,
                                         const PreparedStatistic& stat2,
                                         const NullModel& model, std::size_t m_draws,
                                         double alpha, std::uint64_t seed, int threads) {
  threshold_rank(m_draws, alpha);
  if (model.n() != stat1.design().rows() || model.n() != stat2.design().rows()) {
    throw Error(ErrorKind::DimensionMismatch, "null model size != N");
  }
  const bool canon = canonicalize(stat1, model) && canonicalize(stat2, model);
  const PreparedStatistic s1 = canon ? stat1.with_c(Vector::Zero(stat1.hypothesis().rows())) : stat1;
  const PreparedStatistic s2 = canon ? stat2.with_c(Vector::Zero(stat2.hypothesis().rows())) : stat2;
  const NullModel sim = canon ? canonical_model(model) : model;
  const unsigned workers = resolve_threads(threads);

  std::vector<double> d1(m_draws), d2(m_draws);
  std::vector<char> g1(m_draws, 0), g2(m_draws, 0);
  parallel_for(m_draws, workers, [&](std::size_t m) {
    Engine eng = substream(seed, kStreamBatch1, m);
    const Vector y0 = simulate_null(sim, eng);
    const StatValue a = s1.evaluate(y0);
    const StatValue b = s2.evaluate(y0);
    g1[m] = a.degenerate;
    g2[m] = b.degenerate;
    d1[m] = a.degenerate ? 0.0 : a.value;
    d2[m] = b.degenerate ? 0.0 : b.value;
  });
  auto count = [](const std::vector<char>& g) {
    return static_cast<std::size_t>(std::count(g.begin(), g.end(), 1));
  };

  CompositeCalibration out;
  out.cal_1 = calibration_from_draws(std::move(d1), alpha, seed, stat1.spec().id(), count(g1));
  out.cal_2 = calibration_from_draws(std::move(d2), alpha, seed, stat2.spec().id(), count(g2));
  const double la1 = out.cal_1.lambda_alpha;
  const double la2 = out.cal_2.lambda_alpha;

  std::vector<double> comp(m_draws);
  parallel_for(m_draws, workers, [&](std::size_t m) {
    Engine eng = substream(seed, kStreamBatch2, m);
    const Vector y0 = simulate_null(sim, eng);
    const StatValue v = composite_value(s1.evaluate(y0), s2.evaluate(y0), la1, la2);
    comp[m] = v.degenerate ? 0.0 : v.value;
  });
  std::sort(comp.begin(), comp.end());
  out.kappa_alpha = comp[threshold_rank(m_draws, alpha) - 1];
  out.sorted_composite = std::move(comp);
  out.alpha = alpha;
  out.m_draws = m_draws;
  out.seed = seed;
  return out;
}

double composite_p_value(const StatValue& observed, const CompositeCalibration& cal) {
  if (observed.degenerate) return 1.0;
  const auto& s = cal.sorted_composite;
  const auto at_least = static_cast<double>(s.end() - std::lower_bound(s.begin(), s.end(), observed.value));
  return (1.0 + at_least) / static_cast<double>(s.size() + 1);
}

}  // namespace threshtest
