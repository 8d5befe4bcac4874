#include <gtest/gtest.h>

#include "test_util.hpp"
#include "threshtest/errors.hpp"
#include "threshtest/simulation.hpp"

using namespace threshtest;
using testutil::gaussian_matrix;
using testutil::gaussian_vector;

namespace {

double corr(const Vector& a, const Vector& b) {
  const Vector ca = (a.array() - a.mean()).matrix(), cb = (b.array() - b.mean()).matrix();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

}  // namespace

TEST(GenDesign, Ar1Correlation) {
  Engine eng = substream(1, 4, 0);
  const DesignMatrix x = gen_design(10000, 3, DesignSpec{}, eng);
  ASSERT_EQ(x.cols(), 4);
  EXPECT_EQ(x.intercept_column(), Index{0});
  EXPECT_TRUE((x.values().col(0).array() == 1.0).all());
  EXPECT_NEAR(corr(x.values().col(1), x.values().col(2)), 0.5, 0.05);
  EXPECT_NEAR(corr(x.values().col(1), x.values().col(3)), 0.25, 0.05);
  EXPECT_NEAR(x.values().col(2).mean(), 0.0, 1e-12);
  EXPECT_NEAR(x.values().col(2).squaredNorm() / 10000, 1.0, 1e-3);
}

TEST(GenDesign, IdentityAndSingleColumn) {
  Engine eng = substream(2, 4, 0);
  DesignSpec spec;
  spec.covariance = CovarianceKind::Identity;
  spec.intercept = false;
  const DesignMatrix x = gen_design(10000, 2, spec, eng);
  EXPECT_LT(std::abs(corr(x.values().col(0), x.values().col(1))), 0.1);
  const DesignMatrix one = gen_design(50, 1, spec, eng);
  EXPECT_EQ(one.cols(), 1);
  EXPECT_THROW(gen_design(0, 2, spec, eng), Error);
}

TEST(GenBeta, SupportAndSigns) {
  Engine eng = substream(3, 3, 0);
  EXPECT_EQ(gen_beta({0, 2.0}, 5, eng), Vector::Zero(5));
  const Vector b = gen_beta({5, 1.0}, 5, eng);
  EXPECT_TRUE((b.array().abs() == 1.0).all());
  const Vector c = gen_beta({3, 0.7}, 10, eng);
  EXPECT_EQ((c.array() != 0.0).count(), 3);
  EXPECT_TRUE(((c.array() == 0.0) || (c.array().abs() == 0.7)).all());
  EXPECT_THROW(gen_beta({11, 1.0}, 10, eng), Error);
}

TEST(GenBeta, PositionsUniform) {
  const Index p = 8;
  const int draws = 10000;
  std::vector<int> hits(p, 0);
  int positive = 0;
  for (int i = 0; i < draws; ++i) {
    Engine eng = substream(4, 3, static_cast<std::uint64_t>(i));
    const Vector b = gen_beta({1, 1.0}, p, eng);
    for (Index k = 0; k < p; ++k) {
      if (b(k) != 0.0) {
        ++hits[static_cast<std::size_t>(k)];
        positive += b(k) > 0;
      }
    }
  }
  const double expect = draws / double(p);
  const double sd = std::sqrt(draws * (1.0 / p) * (1 - 1.0 / p));
  for (int h : hits) EXPECT_LT(std::abs(h - expect), 3 * sd);
  EXPECT_LT(std::abs(positive - draws / 2.0), 3 * std::sqrt(draws / 4.0));
}

TEST(GenResponse, CanonicalMeans) {
  const Matrix cov = Matrix::Zero(100, 2);
  const Vector beta = Vector::Zero(2);
  double bern = 0, pois = 0, gsum = 0, gsq = 0;
  for (int i = 0; i < 1000; ++i) {
    Engine eng = substream(5, 3, static_cast<std::uint64_t>(i));
    bern += gen_response(cov, -2.0, beta, GlmFamily(FamilyTag::Bernoulli), eng).sum();
    pois += gen_response(cov, -2.0, beta, GlmFamily(FamilyTag::Poisson), eng).sum();
    const Vector g = gen_response(cov, 0.0, beta, GlmFamily(FamilyTag::Gaussian), eng);
    gsum += g.sum();
    gsq += g.squaredNorm();
  }
  EXPECT_NEAR(bern / 1e5, 1 / (1 + std::exp(2.0)), 0.004);
  EXPECT_NEAR(pois / 1e5, std::exp(-2.0), 0.004);
  EXPECT_NEAR(gsum / 1e5, 0.0, 0.01);
  EXPECT_NEAR(gsq / 1e5, 1.0, 0.02);
  Engine eng = substream(6, 3, 0);
  try {
    gen_response(Matrix::Ones(3, 1), 0.0, Vector::Constant(1, 40.0), GlmFamily(FamilyTag::Poisson), eng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Overflow);
  }
}

TEST(Baselines, FTestExactLevel) {
  std::mt19937_64 rng(7);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(30, 5, rng));
  const LinearHypothesis h = SubsetHypothesis{1, Vector::Zero(5)}.expand(6);
  int rej = 0;
  for (int i = 0; i < 4000; ++i) rej += baseline_f_test(gaussian_vector(30, rng), x, h, 0.05).reject;
  EXPECT_NEAR(rej / 4000.0, 0.05, 2 * std::sqrt(0.05 * 0.95 / 4000) + 0.005);
  EXPECT_THROW(baseline_f_test(gaussian_vector(5, rng), DesignMatrix(gaussian_matrix(5, 6, rng)),
                               LinearHypothesis(Matrix::Identity(6, 6), Vector::Zero(6)), 0.05),
               Error);
}

TEST(Baselines, GaussianLrtIsRssDifference) {
  std::mt19937_64 rng(8);
  const Matrix cov = gaussian_matrix(25, 4, rng);
  const DesignMatrix x = DesignMatrix::with_intercept(cov);
  const Vector y = gaussian_vector(25, rng) + cov.col(0) * 0.4;
  const TestResult lrt = baseline_lrt(y, x, GlmFamily{}, 0.05);
  const Vector bh = x.values().colPivHouseholderQr().solve(y);
  const double rss = (y - x.values() * bh).squaredNorm();
  const double rss0 = (y.array() - y.mean()).matrix().squaredNorm();
  EXPECT_NEAR(lrt.observed.value, rss0 - rss, 1e-8 * rss0);
  EXPECT_EQ(lrt.statistic_id, "lrt");
}

TEST(Baselines, IrlsMatchesLogisticStationarity) {
  std::mt19937_64 rng(9);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(200, 3, rng));
  Engine eng = substream(9, 3, 0);
  const Vector y = gen_response(x.covariates(), -0.5, (Vector(3) << 0.8, -0.4, 0.0).finished(),
                                GlmFamily(FamilyTag::Bernoulli), eng);
  const GlmFit fit = fit_glm_irls(x.values(), y, GlmFamily(FamilyTag::Bernoulli));
  ASSERT_TRUE(fit.converged);
  const Vector mu = (x.values() * fit.beta).unaryExpr([](double e) { return 1 / (1 + std::exp(-e)); });
  EXPECT_LT((x.values().transpose() * (y - mu)).norm(), 1e-6);
  EXPECT_NEAR(null_deviance(Vector::Constant(4, 1.0), GlmFamily(FamilyTag::Poisson)), 0.0, 1e-12);
}

TEST(Power, ThetaZeroMatchesLevelAndThreadsDoNotMatter) {
  ExperimentConfig cfg;
  cfg.n = 40;
  cfg.p = 6;
  cfg.m_calib = 199;
  cfg.n_reps = 200;
  cfg.theta_grid = {0.0, 0.3, 0.8};
  cfg.s_values = {1, 6};
  cfg.seed = 11;
  const PowerTable one = estimate_power(cfg);
  cfg.threads = 3;
  const PowerTable three = estimate_power(cfg);
  ASSERT_EQ(one.rows.size(), three.rows.size());
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    EXPECT_EQ(one.rows[i].power_estimate, three.rows[i].power_estimate);
    EXPECT_EQ(one.rows[i].statistic_id, three.rows[i].statistic_id);
  }
  const PowerTable level = estimate_level(cfg);
  for (const auto& lr : level.rows) {
    bool found = false;
    for (const auto& pr : one.rows) {
      if (pr.statistic_id == lr.statistic_id && pr.s == lr.s && pr.theta == 0.0) {
        EXPECT_EQ(pr.power_estimate, lr.power_estimate);
        found = true;
      }
    }
    EXPECT_TRUE(found);
  }
  for (const auto& r : one.rows) {
    EXPECT_GE(r.power_estimate, 0.0);
    EXPECT_LE(r.power_estimate, 1.0);
    EXPECT_NEAR(r.mc_standard_error, std::sqrt(r.power_estimate * (1 - r.power_estimate) / r.n_reps), 1e-15);
    EXPECT_EQ(r.status, "ok");
  }
  // ordering: method, then s, then theta
  EXPECT_EQ(one.rows[0].s, 1);
  EXPECT_EQ(one.rows[1].theta, 0.3);
  EXPECT_EQ(one.rows[3].s, 6);
}

TEST(Power, GrowsWithSignal) {
  ExperimentConfig cfg;
  cfg.n = 50;
  cfg.p = 5;
  cfg.m_calib = 199;
  cfg.n_reps = 200;
  cfg.theta_grid = {0.0, 0.5, 2.0};
  cfg.methods = {"lasso"};
  const PowerTable t = estimate_power(cfg);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_LT(t.rows[0].power_estimate, 0.15);
  EXPECT_GT(t.rows[2].power_estimate, 0.95);
  EXPECT_TRUE(t.warnings.empty());
}

TEST(Power, PerRowErrorsDoNotAbort) {
  ExperimentConfig cfg;
  cfg.n = 20;
  cfg.p = 30;
  cfg.m_calib = 99;
  cfg.n_reps = 20;
  cfg.methods = {"lasso", "fisher", "bogus"};
  const PowerTable t = estimate_power(cfg);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].status, "ok");
  EXPECT_NE(t.rows[1].status.find("error"), std::string::npos);
  EXPECT_NE(t.rows[2].status.find("error"), std::string::npos);
}

TEST(Power, GlmFamiliesRun) {
  ExperimentConfig cfg;
  cfg.n = 60;
  cfg.p = 5;
  cfg.family = GlmFamily(FamilyTag::Poisson);
  cfg.m_calib = 199;
  cfg.n_reps = 100;
  cfg.theta_grid = {0.0};
  const PowerTable t = estimate_power(cfg);
  ASSERT_FALSE(t.rows.empty());
  EXPECT_EQ(t.rows[0].statistic_id, "glm_sup");
  for (const auto& r : t.rows) EXPECT_EQ(r.family, "poisson");
}

TEST(Methods, Defaults) {
  const auto g = default_methods(FamilyTag::Gaussian, 100, 10);
  EXPECT_NE(std::find(g.begin(), g.end(), "fisher"), g.end());
  const auto wide = default_methods(FamilyTag::Gaussian, 100, 200);
  EXPECT_EQ(std::find(wide.begin(), wide.end(), "fisher"), wide.end());
  EXPECT_EQ(std::find(wide.begin(), wide.end(), "lrt"), wide.end());
  const auto b = default_methods(FamilyTag::Bernoulli, 100, 10);
  EXPECT_EQ(b.front(), "glm_sup");
}
