#include <gtest/gtest.h>
#include <thread>

#include "test_util.hpp"
#include "threshtest/errors.hpp"
#include "threshtest/inference.hpp"
#include "threshtest/rng.hpp"
#include "threshtest/simulation.hpp"

using namespace threshtest;
using testutil::gaussian_matrix;
using testutil::gaussian_vector;

namespace {

McConfig mc(std::size_t m, std::uint64_t seed = 1) {
  McConfig c;
  c.m_draws = m;
  c.seed = seed;
  return c;
}

const StatisticSpec kSqrt{StatFamily::SqrtAffineLasso};

}  // namespace

TEST(RunTest, ExactNullFitDoesNotReject) {
  std::mt19937_64 rng(1);
  const DesignMatrix x(gaussian_matrix(10, 3, rng));
  const Vector beta = gaussian_vector(3, rng);
  const LinearHypothesis h(Matrix::Identity(3, 3), beta);
  const Vector y = x.values() * beta;
  const TestResult r = run_test(y, x, h, StatisticSpec{StatFamily::AffineLasso}, 0.05, mc(99));
  EXPECT_NEAR(r.observed.value, 0.0, 1e-10);
  EXPECT_FALSE(r.reject);
  EXPECT_EQ(r.p_value, 1.0);
  const TestResult s = run_test(y, x, h, kSqrt, 0.05, mc(99));
  EXPECT_TRUE(s.observed.degenerate);
  EXPECT_FALSE(s.reject);
  EXPECT_TRUE(s.degenerate_note.has_value());
}

TEST(RunTest, FieldsAndInvariants) {
  std::mt19937_64 rng(2);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(40, 5, rng));
  const LinearHypothesis h = SubsetHypothesis{1, Vector::Zero(5)}.expand(6);
  Vector beta = Vector::Zero(6);
  beta(2) = 0.6;
  const Vector y = x.values() * beta + gaussian_vector(40, rng);
  const TestResult r = run_test(y, x, h, kSqrt, 0.05, mc(999, 17));
  EXPECT_EQ(r.m_draws, 999u);
  EXPECT_EQ(r.seed, 17u);
  EXPECT_EQ(r.statistic_id, kSqrt.id());
  EXPECT_EQ(r.reject, r.observed.value > r.lambda_alpha);
  EXPECT_EQ(r.reject, r.p_value <= 0.05);
  EXPECT_THROW(run_test(y, x, h, kSqrt, 1.5, mc(999)), Error);
}

TEST(RunTest, ScaleInvarianceOfSqrtDecision) {
  std::mt19937_64 rng(3);
  const DesignMatrix x(gaussian_matrix(30, 6, rng));
  const LinearHypothesis h(gaussian_matrix(2, 6, rng), gaussian_vector(2, rng));
  const ReducedProblem red = build_reduction(x, h);
  const Vector e = gaussian_vector(30, rng);
  const Vector base = x.values() * red.beta_c();
  const TestResult a = run_test(base + e, x, h, kSqrt, 0.05, mc(499));
  for (double sigma : {0.01, 7.0}) {
    const TestResult b = run_test(base + sigma * e, x, h, kSqrt, 0.05, mc(499));
    EXPECT_NEAR(b.observed.value, a.observed.value, 1e-10 * a.observed.value);
    EXPECT_EQ(b.p_value, a.p_value);
    EXPECT_EQ(b.reject, a.reject);
  }
}

TEST(RunTest, SqrtLassoLevel) {
  std::mt19937_64 rng(4);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(50, 8, rng));
  const LinearHypothesis h = SubsetHypothesis{1, Vector::Zero(8)}.expand(9);
  const PreparedStatistic st(kSqrt, x, h);
  CalibrationCache cache;
  int rejections = 0;
  const int reps = 2000;
  for (int i = 0; i < reps; ++i) {
    Engine eng = substream(99, 3, static_cast<std::uint64_t>(i));
    Vector y(50);
    for (Index k = 0; k < 50; ++k) y(k) = 3.0 - 2.0 * draw_normal(eng);
    rejections += run_test(y, st, 0.05, mc(999, 5), &cache).reject ? 1 : 0;
  }
  EXPECT_EQ(cache.single.size(), 1u);
  EXPECT_NEAR(rejections / double(reps), 0.05, 0.02);
}

TEST(RunTest, FisherDecisionMatchesFTest) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const Index p = 3 + t % 5;
    const DesignMatrix x(gaussian_matrix(30, p, rng));
    const LinearHypothesis h(gaussian_matrix(1 + t % p, p, rng), gaussian_vector(1 + t % p, rng));
    const Vector y = gaussian_vector(30, rng) + x.values() * gaussian_vector(p, rng) * 0.3;
    const TestResult a = run_test(y, x, h, StatisticSpec{StatFamily::FisherWeighted}, 0.05, mc(1999));
    const TestResult b = baseline_f_test(y, x, h, 0.05);
    EXPECT_EQ(a.reject, b.reject);
    EXPECT_NEAR(a.p_value, b.p_value, 1e-9);
  }
}

TEST(Composite, RejectsWhenOneComponentDominates) {
  std::mt19937_64 rng(6);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(60, 10, rng));
  const LinearHypothesis h = SubsetHypothesis{1, Vector::Zero(10)}.expand(11);
  Vector beta = Vector::Zero(11);
  beta(4) = 1.5;
  const Vector y = x.values() * beta + gaussian_vector(60, rng);
  const TestResult r = run_composite(y, x, h, 0.05, mc(499));
  EXPECT_TRUE(r.reject);
  EXPECT_EQ(r.statistic_id.rfind("oplus(", 0), 0u);
}

TEST(Composite, IdenticalComponentsMatchSingleDecision) {
  std::mt19937_64 rng(7);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(40, 6, rng));
  const LinearHypothesis h = SubsetHypothesis{1, Vector::Zero(6)}.expand(7);
  const PreparedStatistic st(kSqrt, x, h);
  const NullModel model = NullModel::gaussian_pivotal(st.reduction(), x);
  const CompositeCalibration cc = calibrate_composite(st, st, model, 999, 0.05, 3);
  for (int t = 0; t < 200; ++t) {
    const Vector y = gaussian_vector(40, rng) + x.values().col(1 + t % 6) * (t % 3) * 0.2;
    const StatValue v = st.evaluate(y);
    const TestResult comp = decide_composite(v, v, cc, "c");
    EXPECT_EQ(comp.reject, v.value / cc.cal_1.lambda_alpha > cc.kappa_alpha);
  }
}

TEST(Composite, Level) {
  std::mt19937_64 rng(8);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(50, 8, rng));
  const LinearHypothesis h = SubsetHypothesis{1, Vector::Zero(8)}.expand(9);
  CalibrationCache cache;
  int rejections = 0;
  for (int i = 0; i < 2000; ++i) {
    rejections += run_composite(gaussian_vector(50, rng), x, h, 0.05, mc(999, 3), &cache).reject ? 1 : 0;
  }
  EXPECT_EQ(cache.composite.size(), 1u);
  EXPECT_NEAR(rejections / 2000.0, 0.05, 0.02);
}

TEST(Cache, InstallOnceUnderConcurrency) {
  InstallOnceCache<int> cache;
  std::atomic<int> calls{0};
  std::vector<std::jthread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&] {
      const auto v = cache.get_or_compute("k", [&] {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return 5;
      });
      EXPECT_EQ(*v, 5);
    });
  }
  workers.clear();
  EXPECT_EQ(calls.load(), 1);
}

TEST(Cache, KeysSeparateDesignsAndSeeds) {
  std::mt19937_64 rng(9);
  const LinearHypothesis h(Matrix::Identity(3, 3), Vector::Zero(3));
  const PreparedStatistic a(kSqrt, DesignMatrix(gaussian_matrix(10, 3, rng)), h);
  const PreparedStatistic b(kSqrt, DesignMatrix(gaussian_matrix(10, 3, rng)), h);
  const NullModel ma = NullModel::gaussian_pivotal(a.reduction(), a.design());
  const NullModel mb = NullModel::gaussian_pivotal(b.reduction(), b.design());
  EXPECT_NE(calibration_key(a, ma, mc(99), 0.05), calibration_key(b, mb, mc(99), 0.05));
  EXPECT_NE(calibration_key(a, ma, mc(99, 1), 0.05), calibration_key(a, ma, mc(99, 2), 0.05));
  EXPECT_EQ(calibration_key(a, ma, mc(99), 0.05), calibration_key(a, ma, mc(99), 0.05));
}

TEST(Region, DualToTestOnLattice) {
  std::mt19937_64 rng(10);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(40, 3, rng));
  Matrix a = Matrix::Zero(1, 4);
  a(0, 2) = 1.0;
  const Vector y = x.values() * (Vector(4) << 1, 0.5, -0.3, 0.2).finished() + gaussian_vector(40, rng);
  const PreparedStatistic base(kSqrt, x, LinearHypothesis(a, Vector::Zero(1)));
  const auto cal = calibration_for(base, NullModel::gaussian_pivotal(base.reduction(), x), 0.05, mc(999), nullptr);
  const ConfidenceRegion region(y, x, a, kSqrt, cal->lambda_alpha);
  CrLattice lattice;
  for (int i = 0; i <= 200; ++i) lattice.axis1.push_back(-2.0 + 0.02 * i);
  const CrGridResult grid = cr_grid(region, lattice);
  ASSERT_EQ(grid.member.size(), 201u);
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const TestResult t = decide(PreparedStatistic(kSqrt, x, LinearHypothesis(a, grid.points[i])).evaluate(y), *cal);
    EXPECT_NE(grid.member[i], t.reject);
  }
  // contiguous interval
  ASSERT_TRUE(grid.interval.has_value());
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const double c = grid.points[i](0);
    EXPECT_EQ(grid.member[i], c >= grid.interval->first && c <= grid.interval->second);
  }
  // least-squares estimate is inside, far values are outside
  const Vector ls = x.values().colPivHouseholderQr().solve(y);
  EXPECT_NEAR(region.lambda_cr(a * ls).value, 0.0, 1e-10);
  EXPECT_TRUE(region.contains(a * ls));
  EXPECT_FALSE(region.contains(a * ls + Vector::Constant(1, 50.0)));
  EXPECT_LT(grid.interval->first, (a * ls)(0));
  EXPECT_GT(grid.interval->second, (a * ls)(0));
}

TEST(Region, EdgeCases) {
  std::mt19937_64 rng(11);
  const DesignMatrix x(gaussian_matrix(20, 4, rng));
  const Vector y = gaussian_vector(20, rng);
  const Matrix a = gaussian_matrix(1, 4, rng);
  const ConfidenceRegion zero(y, x, a, kSqrt, 0.0);
  EXPECT_TRUE(cr_grid(zero, CrLattice{}).member.empty());
  const Vector ls = x.values().colPivHouseholderQr().solve(y);
  CrLattice lat{{(a * ls)(0) - 1.0, (a * ls)(0), (a * ls)(0) + 1.0}, {}};
  const CrGridResult g = cr_grid(zero, lat);
  EXPECT_FALSE(g.member[0]);
  EXPECT_FALSE(g.member[2]);
  EXPECT_THROW(ConfidenceRegion(y, x, a, StatisticSpec{StatFamily::AffineLasso}, 1.0), Error);
  const ConfidenceRegion three(y, x, gaussian_matrix(3, 4, rng), kSqrt, 1.0);
  try {
    cr_grid(three, CrLattice{{0.0}, {0.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedDimension);
  }
}

TEST(Region, TwoDimensionalLattice) {
  std::mt19937_64 rng(12);
  const DesignMatrix x(gaussian_matrix(30, 3, rng));
  const Vector y = gaussian_vector(30, rng);
  const Matrix a = Matrix::Identity(3, 3).topRows(2);
  const ConfidenceRegion region(y, x, a, StatisticSpec{StatFamily::SqrtAffineGroupLasso}, 0.5);
  CrLattice lat;
  for (int i = 0; i < 11; ++i) {
    lat.axis1.push_back(-1 + 0.2 * i);
    lat.axis2.push_back(-1 + 0.2 * i);
  }
  const CrGridResult g = cr_grid(region, lat);
  ASSERT_EQ(g.points.size(), 121u);
  EXPECT_EQ(g.points[12](0), lat.axis1[1]);
  EXPECT_EQ(g.points[12](1), lat.axis2[1]);
  EXPECT_FALSE(g.interval.has_value());
  for (std::size_t i = 0; i < g.points.size(); i += 7) {
    EXPECT_EQ(g.member[i], cr_member(g.points[i], y, x, a, StatisticSpec{StatFamily::SqrtAffineGroupLasso}, 0.5));
  }
}

TEST(Degenerate, AllOnesBernoulliDoesNotReject) {
  std::mt19937_64 rng(13);
  const DesignMatrix x = DesignMatrix::with_intercept(gaussian_matrix(30, 4, rng));
  const LinearHypothesis h = SubsetHypothesis{1, Vector::Zero(4)}.expand(5);
  const StatisticSpec spec{StatFamily::GlmScoreSup, std::nullopt, GlmFamily(FamilyTag::Bernoulli)};
  const TestResult r = run_test(Vector::Ones(30), x, h, spec, 0.05, mc(199));
  EXPECT_TRUE(r.observed.degenerate);
  EXPECT_FALSE(r.reject);
  EXPECT_EQ(r.p_value, 1.0);
  ASSERT_TRUE(r.degenerate_note.has_value());
  EXPECT_NE(r.degenerate_note->find("degenerate"), std::string::npos);
}
