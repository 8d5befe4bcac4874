#include <gtest/gtest.h>

#include <sstream>

#include "threshtest/errors.hpp"
#include "threshtest/io.hpp"

using namespace threshtest;
using namespace threshtest::io;

TEST(Numbers, RoundTripAndStrictParsing) {
  for (double v : {0.1, -2.5e-300, 1.0 / 3.0, 12345678.9, 0.0}) {
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double(" 2.5 "), 2.5);
  EXPECT_THROW(parse_double("2,5"), Error);
  EXPECT_THROW(parse_double("abc"), Error);
  EXPECT_THROW(parse_double(""), Error);
}

TEST(Dataset, ReadsResponseAndCovariates) {
  std::istringstream in("a,y,b\n1,10,2\n3,11,4\n5,12,7\n");
  const Dataset ds = read_dataset_csv(in, "y", true);
  EXPECT_EQ(ds.x.cols(), 3);
  EXPECT_EQ(ds.x.intercept_column(), Index{0});
  EXPECT_EQ(ds.y, (Vector(3) << 10, 11, 12).finished());
  EXPECT_EQ(ds.x.values()(2, 2), 7.0);
  EXPECT_EQ(ds.x.values()(1, 1), 3.0);
}

TEST(Dataset, RejectsMalformedInput) {
  std::istringstream ragged("a,y\n1,2\n3\n");
  EXPECT_THROW(read_dataset_csv(ragged, "y", false), Error);
  std::istringstream missing("a,b\n1,2\n3,4\n");
  EXPECT_THROW(read_dataset_csv(missing, "y", false), Error);
  std::istringstream text("a,y\n1,x\n3,4\n");
  try {
    read_dataset_csv(text, "y", false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }
}

TEST(Hypothesis, ParsesMatrixAndSubsetForms) {
  const auto h = parse_hypothesis(nlohmann::json::parse(R"({"A": [[0,1,0],[0,0,1]], "c": [1, 2], "groups": [[0,1]]})"), 3);
  EXPECT_EQ(h.rows(), 2);
  EXPECT_EQ(h.c(), (Vector(2) << 1, 2).finished());
  EXPECT_TRUE(h.has_explicit_partition());
  const auto s = parse_hypothesis(nlohmann::json::parse(R"({"subset": {"j0": 1}})"), 4);
  EXPECT_EQ(s.rows(), 3);
  EXPECT_EQ(s.c(), Vector::Zero(3));
  EXPECT_THROW(parse_hypothesis(nlohmann::json::parse(R"({"A": [[1,2]]})"), 3), Error);
  EXPECT_THROW(parse_hypothesis(nlohmann::json::parse(R"({"B": 1})"), 3), Error);
  EXPECT_THROW(parse_hypothesis(nlohmann::json::parse(R"({"subset": {"j0": 4}})"), 4), Error);
}

TEST(Calibration, RoundTrip) {
  CalibrationResult cal = calibration_from_draws({0.3, 0.1, 1.0 / 3.0, 0.7}, 0.5, 99, "sqrt_affine_lasso");
  cal.n_degenerate = 1;
  cal.exact = FisherReference{2, 17};
  std::stringstream buf;
  write_calibration(buf, cal);
  const CalibrationResult back = read_calibration(buf);
  EXPECT_EQ(back.sorted_null_stats, cal.sorted_null_stats);
  EXPECT_EQ(back.lambda_alpha, cal.lambda_alpha);
  EXPECT_EQ(back.alpha, cal.alpha);
  EXPECT_EQ(back.seed, cal.seed);
  EXPECT_EQ(back.statistic_id, cal.statistic_id);
  EXPECT_EQ(back.n_degenerate, 1u);
  ASSERT_TRUE(back.exact.has_value());
  EXPECT_EQ(back.exact->df2, 17);
  std::istringstream truncated("# m_draws=3\ndraw,value\n1,0.5\n");
  EXPECT_THROW(read_calibration(truncated), Error);
}

TEST(Records, TestResultFields) {
  TestResult r;
  r.observed = {1.25, false};
  r.lambda_alpha = 1.0;
  r.p_value = 0.01;
  r.reject = true;
  r.statistic_id = "x";
  r.m_draws = 99;
  r.seed = 3;
  const std::string s = format_test_result(r);
  for (const char* key : {"statistic=x\n", "observed=1.25\n", "lambda_alpha=1\n", "p_value=0.01\n",
                          "reject=true\n", "alpha=0.05\n", "M=99\n", "seed=3\n", "degenerate=false\n"}) {
    EXPECT_NE(s.find(key), std::string::npos) << key;
  }
  EXPECT_EQ(s.find("note="), std::string::npos);
}

TEST(Records, PowerCsvIsStrict) {
  PowerRow row;
  row.statistic_id = "lasso";
  row.family = "gaussian";
  row.s = 1;
  row.theta = 0.25;
  row.power_estimate = 0.5;
  row.mc_standard_error = 0.05;
  row.n_reps = 100;
  row.status = "error: a, b";
  std::ostringstream os;
  write_power_csv(os, {row});
  EXPECT_EQ(os.str(),
            "statistic_id,family,s,theta,power_estimate,mc_standard_error,n_reps,status\n"
            "lasso,gaussian,1,0.25,0.5,0.05,100,error: a; b\n");
}

TEST(Manifest, DigestIgnoresFieldOrder) {
  RunManifest a, b;
  a.config = nlohmann::json::parse(R"({"n": 10, "p": [1, 2], "x": {"u": 1, "v": 2}})");
  b.config = nlohmann::json::parse(R"({"x": {"v": 2, "u": 1}, "p": [1, 2], "n": 10})");
  EXPECT_EQ(a.config_digest(), b.config_digest());
  b.config["n"] = 11;
  EXPECT_NE(a.config_digest(), b.config_digest());
  const auto j = a.to_json();
  EXPECT_TRUE(j.contains("config_digest"));
  EXPECT_TRUE(j.contains("timing"));
}
