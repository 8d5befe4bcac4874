#include "threshtest/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "threshtest/errors.hpp"
#include "threshtest/parallel.hpp"

namespace threshtest {

namespace {

constexpr std::uint64_t kStreamData = 3;
constexpr std::uint64_t kStreamDesign = 4;
constexpr double kMaxPoissonLogMean = 30.0;

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double clamp_eta(double eta) { return std::clamp(eta, -30.0, 30.0); }

double unit_deviance(double y, double mu, FamilyTag tag) {
  auto xlogy = [](double a, double b) { return a == 0.0 ? 0.0 : a * std::log(a / b); };
  switch (tag) {
    case FamilyTag::Gaussian: return (y - mu) * (y - mu);
    case FamilyTag::Bernoulli: return 2.0 * (xlogy(y, mu) + xlogy(1.0 - y, 1.0 - mu));
    case FamilyTag::Poisson: return 2.0 * (xlogy(y, mu) - (y - mu));
  }
  return 0.0;
}

enum class MethodKind { Single, Composite, Fisher, Lrt };

struct Method {
  std::string name;
  MethodKind kind = MethodKind::Single;
  std::optional<PreparedStatistic> s1;
  std::optional<PreparedStatistic> s2;
  std::string error;
};

StatisticSpec spec_of(StatFamily f, const GlmFamily& fam, Index r) {
  StatisticSpec s;
  s.family = f;
  s.glm_family = fam;
  if (s.is_group()) s.row_partition = whole_partition(r);
  return s;
}

Method make_method(const std::string& name, const ExperimentConfig& cfg, const DesignMatrix& x,
                   const LinearHypothesis& hyp) {
  Method m;
  m.name = name;
  const bool glm = cfg.family.tag() != FamilyTag::Gaussian;
  const Index r = hyp.rows();
  try {
    auto single = [&](StatFamily f) {
      m.kind = MethodKind::Single;
      m.s1.emplace(spec_of(f, cfg.family, r), x, hyp);
    };
    auto composite = [&](StatFamily f1, StatFamily f2) {
      m.kind = MethodKind::Composite;
      m.s1.emplace(spec_of(f1, cfg.family, r), x, hyp);
      m.s2.emplace(spec_of(f2, cfg.family, r), x, hyp);
    };
    if (name == "lasso") {
      single(glm ? StatFamily::GlmScoreSup : StatFamily::SqrtAffineLasso);
    } else if (name == "group") {
      single(glm ? StatFamily::GlmScoreGroup : StatFamily::SqrtAffineGroupLasso);
    } else if (name == "oplus") {
      glm ? composite(StatFamily::GlmScoreSup, StatFamily::GlmScoreGroup)
          : composite(StatFamily::SqrtAffineLasso, StatFamily::SqrtAffineGroupLasso);
    } else if (name == "glm_sup") {
      single(StatFamily::GlmScoreSup);
    } else if (name == "glm_group") {
      single(StatFamily::GlmScoreGroup);
    } else if (name == "glm_oplus") {
      composite(StatFamily::GlmScoreSup, StatFamily::GlmScoreGroup);
    } else if (name == "lad" || name == "fisher_weighted") {
      if (glm) throw Error(ErrorKind::NotApplicable, name + " assumes a linear model");
      single(name == "lad" ? StatFamily::LadSign : StatFamily::FisherWeighted);
    } else if (name == "fisher") {
      if (glm) throw Error(ErrorKind::NotApplicable, "F-test assumes a gaussian linear model");
      if (x.cols() >= x.rows()) throw Error(ErrorKind::NotApplicable, "F-test needs P < N");
      m.kind = MethodKind::Fisher;
    } else if (name == "lrt") {
      if (x.cols() >= x.rows()) throw Error(ErrorKind::NotApplicable, "LRT needs P < N");
      m.kind = MethodKind::Lrt;
    } else {
      throw Error(ErrorKind::InvalidSpec, "unknown method '" + name + "'");
    }
  } catch (const Error& e) {
    m.error = e.what();
  }
  return m;
}

}  // namespace

DesignMatrix gen_design(Index n, Index p, const DesignSpec& spec, Engine& eng) {
  if (n < 1 || p < 1) throw Error(ErrorKind::InvalidSpec, "design needs n, p >= 1");
  if (spec.covariance == CovarianceKind::Ar1 && !(std::abs(spec.rho) < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "AR(1) correlation must satisfy |rho| < 1");
  }
  Matrix z(n, p);
  const double innov = std::sqrt(1.0 - spec.rho * spec.rho);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      const double e = draw_normal(eng);
      if (spec.covariance == CovarianceKind::Ar1 && j > 0) {
        z(i, j) = spec.rho * z(i, j - 1) + innov * e;
      } else {
        z(i, j) = e;
      }
    }
  }
  if (spec.standardize) {
    if (n < 2) throw Error(ErrorKind::InvalidSpec, "standardization needs n >= 2");
    for (Index j = 0; j < p; ++j) {
      const double mean = z.col(j).mean();
      z.col(j).array() -= mean;
      const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n - 1));
      if (sd > 0.0) z.col(j) /= sd;
    }
  }
  if (spec.intercept) return DesignMatrix::with_intercept(z);
  return DesignMatrix(std::move(z));
}

Vector gen_beta(const AlternativeSpec& alt, Index p, Engine& eng) {
  if (alt.s < 0 || alt.s > p) throw Error(ErrorKind::InvalidSpec, "need 0 <= s <= p");
  if (!(alt.theta >= 0.0)) throw Error(ErrorKind::InvalidSpec, "theta must be nonnegative");
  Vector beta = Vector::Zero(p);
  std::vector<Index> pos(static_cast<std::size_t>(p));
  std::iota(pos.begin(), pos.end(), Index{0});
  // Partial Fisher-Yates: the first s slots become a uniform random subset.
  for (Index k = 0; k < alt.s; ++k) {
    std::uniform_int_distribution<Index> pick(k, p - 1);
    std::swap(pos[static_cast<std::size_t>(k)], pos[static_cast<std::size_t>(pick(eng))]);
    const double sign = draw_bernoulli(eng, 0.5) == 1.0 ? 1.0 : -1.0;
    beta(pos[static_cast<std::size_t>(k)]) = sign * alt.theta;
  }
  return beta;
}

Vector gen_response(const Matrix& covariates, double beta0, const Vector& beta,
                    const GlmFamily& family, Engine& eng) {
  if (covariates.cols() != beta.size()) throw Error(ErrorKind::DimensionMismatch, "beta length != p");
  const Vector eta = (covariates * beta).array() + beta0;
  Vector y(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    switch (family.tag()) {
      case FamilyTag::Gaussian: y(i) = eta(i) + draw_normal(eng); break;
      case FamilyTag::Bernoulli: y(i) = draw_bernoulli(eng, family.canonical_inverse_link(eta(i))); break;
      case FamilyTag::Poisson:
        if (eta(i) > kMaxPoissonLogMean) {
          throw Error(ErrorKind::Overflow, "poisson mean exp(" + std::to_string(eta(i)) +
                                               ") exceeds exp(30)");
        }
        y(i) = draw_poisson(eng, std::exp(eta(i)));
        break;
    }
  }
  return y;
}

TestResult baseline_f_test(const Vector& y, const DesignMatrix& x, const LinearHypothesis& hyp,
                           double alpha) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (p >= n) throw Error(ErrorKind::NotApplicable, "F-test needs P < N");
  Eigen::ColPivHouseholderQR<Matrix> qr(x.values());
  if (qr.rank() < p) throw Error(ErrorKind::RankDeficient, "rank(X) < P");
  const double rss = (y - x.values() * qr.solve(y)).squaredNorm();
  const ReducedProblem red = build_reduction(x, hyp);
  const double rss0 = residual(red, x, y).squaredNorm();
  const Index df1 = hyp.rows();
  const Index df2 = n - p;
  const double f = ((rss0 - rss) / static_cast<double>(df1)) / (rss / static_cast<double>(df2));
  boost::math::fisher_f_distribution<double> dist(static_cast<double>(df1), static_cast<double>(df2));
  TestResult out;
  out.statistic_id = "f_test";
  out.alpha = alpha;
  out.observed = {std::max(f, 0.0), !(rss > 0.0)};
  out.lambda_alpha = boost::math::quantile(dist, 1.0 - alpha);
  out.p_value = out.observed.degenerate
                    ? 1.0
                    : boost::math::cdf(boost::math::complement(dist, out.observed.value));
  out.reject = !out.observed.degenerate && out.p_value <= alpha;
  return out;
}

GlmFit fit_glm_irls(const Matrix& x, const Vector& y, const GlmFamily& family, double tol,
                    std::size_t max_iter) {
  const Index n = x.rows();
  const FamilyTag tag = family.tag();
  Vector mu(n);
  for (Index i = 0; i < n; ++i) {
    mu(i) = tag == FamilyTag::Bernoulli ? (y(i) + 0.5) / 2.0
            : tag == FamilyTag::Poisson ? y(i) + 0.1
                                        : y(i);
  }
  auto link = [&](double m) {
    return tag == FamilyTag::Bernoulli ? std::log(m / (1.0 - m))
           : tag == FamilyTag::Poisson ? std::log(m)
                                       : m;
  };
  Vector eta = mu.unaryExpr(link);
  auto deviance_of = [&](const Vector& m) {
    double d = 0.0;
    for (Index i = 0; i < n; ++i) d += unit_deviance(y(i), m(i), tag);
    return d;
  };
  GlmFit fit;
  fit.beta = Vector::Zero(x.cols());
  double dev = deviance_of(mu);
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w(n), z(n);
    for (Index i = 0; i < n; ++i) {
      // Canonical link: d mu / d eta = V(mu).
      const double dmu = tag == FamilyTag::Gaussian ? 1.0 : family.variance(mu(i));
      const double var = tag == FamilyTag::Gaussian ? 1.0 : family.variance(mu(i));
      const double safe = std::max(dmu, 1e-12);
      z(i) = eta(i) + (y(i) - mu(i)) / safe;
      w(i) = std::max(safe * safe / std::max(var, 1e-12), 1e-12);
    }
    const Vector sw = w.cwiseSqrt();
    fit.beta = (sw.asDiagonal() * x).colPivHouseholderQr().solve(sw.cwiseProduct(z));
    eta = (x * fit.beta).unaryExpr([](double e) { return clamp_eta(e); });
    mu = eta.unaryExpr([&](double e) { return family.canonical_inverse_link(e); });
    const double next = deviance_of(mu);
    fit.iterations = it + 1;
    if (std::abs(next - dev) / (std::abs(next) + 0.1) < tol) {
      fit.converged = true;
      dev = next;
      break;
    }
    dev = next;
  }
  fit.deviance = dev;
  return fit;
}

double null_deviance(const Vector& y, const GlmFamily& family) {
  const double ybar = y.mean();
  double d = 0.0;
  for (Index i = 0; i < y.size(); ++i) d += unit_deviance(y(i), ybar, family.tag());
  return d;
}

TestResult baseline_lrt(const Vector& y, const DesignMatrix& x, const GlmFamily& family,
                        double alpha) {
  if (!x.intercept_column()) {
    throw Error(ErrorKind::NotApplicable, "LRT baseline needs an intercept column");
  }
  if (x.cols() >= x.rows()) throw Error(ErrorKind::NotApplicable, "LRT needs P < N");
  family.check_support(y);
  const GlmFit fit = fit_glm_irls(x.values(), y, family);
  const double stat = std::max(null_deviance(y, family) - fit.deviance, 0.0);
  const auto df = static_cast<double>(x.cols() - 1);
  boost::math::chi_squared_distribution<double> dist(df);
  TestResult out;
  out.statistic_id = "lrt";
  out.alpha = alpha;
  out.observed = {stat, false};
  out.lambda_alpha = boost::math::quantile(dist, 1.0 - alpha);
  out.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  out.reject = out.p_value <= alpha;
  if (!fit.converged) out.degenerate_note = "IRLS did not converge; last deviance used";
  return out;
}

std::vector<std::string> default_methods(FamilyTag family, Index n, Index p) {
  std::vector<std::string> out;
  if (family == FamilyTag::Gaussian) {
    out = {"lasso", "group", "oplus", "lad"};
    if (p + 1 < n) out.push_back("fisher");
  } else {
    out = {"glm_sup", "glm_group", "glm_oplus"};
  }
  if (p + 1 < n) out.push_back("lrt");
  return out;
}

PowerTable estimate_power(const ExperimentConfig& cfg) {
  if (!cfg.design.intercept) {
    throw Error(ErrorKind::InvalidSpec, "experiments need a design with an intercept column");
  }
  if (cfg.n_reps == 0) throw Error(ErrorKind::InvalidSpec, "n_reps must be positive");
  threshold_rank(cfg.m_calib, cfg.alpha);

  Engine design_eng = substream(cfg.seed, kStreamDesign, 0);
  const DesignMatrix x = gen_design(cfg.n, cfg.p, cfg.design, design_eng);
  const Matrix covariates = x.covariates();
  const LinearHypothesis hyp = SubsetHypothesis{1, Vector::Zero(cfg.p)}.expand(cfg.p + 1);

  const std::vector<std::string> names =
      cfg.methods.empty() ? default_methods(cfg.family.tag(), cfg.n, cfg.p) : cfg.methods;
  std::vector<Method> methods;
  for (const auto& name : names) methods.push_back(make_method(name, cfg, x, hyp));

  McConfig mc;
  mc.m_draws = cfg.m_calib;
  mc.seed = derive_seed(cfg.seed, stable_hash("calibration"));
  mc.threads = cfg.threads;
  CalibrationCache cache;

  // Gaussian-model calibrations do not depend on the data: build them up
  // front with every worker. GLM plug-in calibrations are filled lazily.
  for (auto& m : methods) {
    if (!m.error.empty()) continue;
    try {
      if (m.kind == MethodKind::Single && !m.s1->spec().is_glm()) {
        calibration_for(*m.s1, NullModel::gaussian_pivotal(m.s1->reduction(), x), cfg.alpha, mc,
                        &cache);
      } else if (m.kind == MethodKind::Composite && !m.s1->spec().is_glm()) {
        composite_calibration_for(*m.s1, *m.s2, NullModel::gaussian_pivotal(m.s1->reduction(), x),
                                  cfg.alpha, mc, &cache);
      }
    } catch (const Error& e) {
      m.error = e.what();
    }
  }
  McConfig inner = mc;
  inner.threads = 1;

  struct Cell {
    Index s;
    double theta;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (Index s : cfg.s_values) {
    if (s < 0 || s > cfg.p) throw Error(ErrorKind::InvalidSpec, "s out of range [0, p]");
    for (double theta : cfg.theta_grid) {
      const std::string label = "cell:s=" + std::to_string(s) + ";theta=" + shortest(theta);
      cells.push_back({s, theta, derive_seed(cfg.seed, stable_hash(label))});
    }
  }

  const std::size_t n_methods = methods.size();
  const std::size_t n_tasks = cells.size() * cfg.n_reps;
  // 0 = accept, 1 = reject, 2 = error
  std::vector<std::uint8_t> outcome(n_tasks * n_methods, 0);
  std::vector<std::string> task_error(n_tasks * n_methods);

  parallel_for(n_tasks, resolve_threads(cfg.threads), [&](std::size_t task) {
    const Cell& cell = cells[task / cfg.n_reps];
    const std::size_t rep = task % cfg.n_reps;
    Engine eng = substream(cell.seed, kStreamData, rep);
    const Vector beta = gen_beta({cell.s, cell.theta}, cfg.p, eng);
    const Vector y = gen_response(covariates, cfg.beta0, beta, cfg.family, eng);
    for (std::size_t k = 0; k < n_methods; ++k) {
      const Method& m = methods[k];
      const std::size_t slot = task * n_methods + k;
      if (!m.error.empty()) {
        outcome[slot] = 2;
        continue;
      }
      try {
        bool reject = false;
        switch (m.kind) {
          case MethodKind::Single: {
            const auto cal = calibration_for(*m.s1, default_null_model(*m.s1, y), cfg.alpha,
                                             inner, &cache);
            reject = rejects(m.s1->evaluate(y), cal->lambda_alpha);
            break;
          }
          case MethodKind::Composite: {
            const auto cal = composite_calibration_for(
                *m.s1, *m.s2, default_null_model(*m.s1, y), cfg.alpha, inner, &cache);
            const StatValue v = composite_value(m.s1->evaluate(y), m.s2->evaluate(y),
                                                cal->cal_1.lambda_alpha, cal->cal_2.lambda_alpha);
            reject = rejects(v, cal->kappa_alpha);
            break;
          }
          case MethodKind::Fisher:
            reject = baseline_f_test(y, x, hyp, cfg.alpha).reject;
            break;
          case MethodKind::Lrt:
            reject = baseline_lrt(y, x, cfg.family, cfg.alpha).reject;
            break;
        }
        outcome[slot] = reject ? 1 : 0;
      } catch (const Error& e) {
        outcome[slot] = 2;
        task_error[slot] = e.what();
      }
    }
  });

  PowerTable table;
  for (std::size_t k = 0; k < n_methods; ++k) {
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      PowerRow row;
      row.statistic_id = methods[k].name;
      row.family = std::string(cfg.family.name());
      row.s = cells[ci].s;
      row.theta = cells[ci].theta;
      std::size_t rejected = 0, valid = 0;
      std::string first_error = methods[k].error;
      for (std::size_t rep = 0; rep < cfg.n_reps; ++rep) {
        const std::size_t slot = (ci * cfg.n_reps + rep) * n_methods + k;
        if (outcome[slot] == 2) {
          if (first_error.empty()) first_error = task_error[slot];
          continue;
        }
        ++valid;
        rejected += outcome[slot];
      }
      row.n_reps = valid;
      if (valid > 0) {
        row.power_estimate = static_cast<double>(rejected) / static_cast<double>(valid);
        row.mc_standard_error =
            std::sqrt(row.power_estimate * (1.0 - row.power_estimate) / static_cast<double>(valid));
      }
      if (!first_error.empty()) {
        row.status = valid == 0 ? "error: " + first_error
                                : "partial (" + std::to_string(cfg.n_reps - valid) +
                                      " failed): " + first_error;
      }
      table.rows.push_back(std::move(row));
    }
  }

  // Soft monotonicity check along theta for each (method, s).
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const PowerRow& a = table.rows[i - 1];
    const PowerRow& b = table.rows[i];
    if (a.statistic_id != b.statistic_id || a.s != b.s || !(b.theta > a.theta)) continue;
    const double slack = 2.0 * std::max(a.mc_standard_error, b.mc_standard_error);
    if (b.power_estimate < a.power_estimate - slack) {
      table.warnings.push_back(b.statistic_id + " s=" + std::to_string(b.s) + ": power drops from " +
                               shortest(a.power_estimate) + " at theta=" + shortest(a.theta) +
                               " to " + shortest(b.power_estimate) + " at theta=" +
                               shortest(b.theta));
    }
  }
  return table;
}

PowerTable estimate_level(const ExperimentConfig& cfg) {
  ExperimentConfig level = cfg;
  level.theta_grid = {0.0};
  return estimate_power(level);
}

}  // namespace threshtest
