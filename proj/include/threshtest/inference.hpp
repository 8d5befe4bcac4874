#pragma once

// Running thresholding tests: single statistics, the composite test, and
// confidence regions obtained by inverting the test over c.

#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "threshtest/calibration.hpp"
#include "threshtest/hypothesis.hpp"
#include "threshtest/statistics.hpp"

namespace threshtest {

struct TestResult {
  StatValue observed;
  double lambda_alpha = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  std::string statistic_id;
  std::size_t m_draws = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> degenerate_note;
};

/// SHA-256 of the shape and raw entries.
std::string fingerprint(const Matrix& m);

/// Thread-safe calibration store. Entries are installed once; concurrent
/// requests for a key that is being computed wait for the first computation.
template <class T>
class InstallOnceCache {
 public:
  std::shared_ptr<const T> get_or_compute(const std::string& key, const std::function<T()>& make) {
    std::shared_future<std::shared_ptr<const T>> fut;
    std::promise<std::shared_ptr<const T>> promise;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(key);
      if (it == entries_.end()) {
        fut = promise.get_future().share();
        entries_.emplace(key, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(std::make_shared<const T>(make()));
      } catch (...) {
        {
          std::lock_guard lock(mutex_);
          entries_.erase(key);
        }
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<std::shared_ptr<const T>>> entries_;
};

struct CalibrationCache {
  InstallOnceCache<CalibrationResult> single;
  InstallOnceCache<CompositeCalibration> composite;
};

/// Null model the statistic is calibrated against: plug-in GLM for the GLM
/// score families, gaussian pivotal otherwise.
NullModel default_null_model(const PreparedStatistic& stat, const Vector& y);

/// Cache key: design and hypothesis fingerprints, statistic, M, alpha,
/// seed and the null model.
std::string calibration_key(const PreparedStatistic& stat, const NullModel& model,
                            const McConfig& mc, double alpha);

/// Calibrates (or fetches) the threshold for `stat` against `model`.
std::shared_ptr<const CalibrationResult> calibration_for(const PreparedStatistic& stat,
                                                         const NullModel& model, double alpha,
                                                         const McConfig& mc,
                                                         CalibrationCache* cache);

/// Observed statistic against a given calibration.
TestResult decide(const StatValue& observed, const CalibrationResult& cal);

TestResult run_test(const Vector& y, const PreparedStatistic& stat, double alpha,
                    const McConfig& mc, CalibrationCache* cache = nullptr);

TestResult run_test(const Vector& y, const DesignMatrix& x, const LinearHypothesis& hyp,
                    const StatisticSpec& stat, double alpha, const McConfig& mc,
                    CalibrationCache* cache = nullptr);

std::shared_ptr<const CompositeCalibration> composite_calibration_for(
    const PreparedStatistic& stat1, const PreparedStatistic& stat2, const NullModel& model,
    double alpha, const McConfig& mc, CalibrationCache* cache);

TestResult decide_composite(const StatValue& v1, const StatValue& v2,
                            const CompositeCalibration& cal, const std::string& statistic_id);

TestResult run_composite(const Vector& y, const PreparedStatistic& stat1,
                         const PreparedStatistic& stat2, double alpha, const McConfig& mc,
                         CalibrationCache* cache = nullptr);

/// Defaults: square-root affine lasso (sup norm) and square-root affine
/// group lasso with a single block.
TestResult run_composite(const Vector& y, const DesignMatrix& x, const LinearHypothesis& hyp,
                         double alpha, const McConfig& mc, CalibrationCache* cache = nullptr);

std::string composite_id(const StatisticSpec& s1, const StatisticSpec& s2);

/// {c : lambda_CR(c; y) <= lambda_alpha}. Restricted to statistics whose
/// null law does not depend on c (exactly pivotal families), so one
/// threshold serves every candidate.
class ConfidenceRegion {
 public:
  ConfidenceRegion(Vector y, DesignMatrix x, Matrix a, StatisticSpec stat, double lambda_alpha);

  const Matrix& hypothesis_matrix() const noexcept { return base_.hypothesis().a(); }
  double lambda_alpha() const noexcept { return lambda_alpha_; }
  const PreparedStatistic& statistic() const noexcept { return base_; }

  StatValue lambda_cr(const Vector& c) const;
  bool contains(const Vector& c) const;

 private:
  Vector y_;
  PreparedStatistic base_;
  double lambda_alpha_;
};

bool cr_member(const Vector& c, const Vector& y, const DesignMatrix& x, const Matrix& a,
               const StatisticSpec& stat, double lambda_alpha);

/// Axis values; `axis2` stays empty for R = 1. Points are ordered with axis1
/// varying slowest.
struct CrLattice {
  std::vector<double> axis1;
  std::vector<double> axis2;
};

struct CrGridResult {
  std::vector<Vector> points;
  std::vector<bool> member;
  /// R = 1: smallest and largest member on the scan.
  std::optional<std::pair<double, double>> interval;
};

CrGridResult cr_grid(const ConfidenceRegion& region, const CrLattice& lattice);
CrGridResult cr_grid(const Vector& y, const DesignMatrix& x, const Matrix& a,
                     const StatisticSpec& stat, double lambda_alpha, const CrLattice& lattice);

}  // namespace threshtest
