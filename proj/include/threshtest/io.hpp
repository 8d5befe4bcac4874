#pragma once

// Text formats: data CSV in, hypothesis documents, calibration tables,
// result records, power tables and run manifests out. Numbers are written
// with std::to_chars (shortest round-trip, '.' decimal point) so output does
// not depend on the locale.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "threshtest/calibration.hpp"
#include "threshtest/hypothesis.hpp"
#include "threshtest/inference.hpp"
#include "threshtest/simulation.hpp"

namespace threshtest::io {

std::string format_double(double v);
double parse_double(std::string_view text);

struct Dataset {
  DesignMatrix x;
  Vector y;
};

/// Comma-separated numeric table with a header row. The response column is
/// named by `response`; the remaining columns form X in file order.
Dataset read_dataset_csv(std::istream& in, const std::string& response, bool add_intercept);
Dataset read_dataset_csv(const std::filesystem::path& path, const std::string& response,
                         bool add_intercept);

/// {"A": [[...], ...], "c": [...], "groups": [[...], ...]} or
/// {"subset": {"j0": k, "c": [...]}}; "c" defaults to zeros.
LinearHypothesis parse_hypothesis(const nlohmann::json& doc, Index p);
LinearHypothesis read_hypothesis_file(const std::filesystem::path& path, Index p);

/// "# key=value" header lines followed by a "draw,value" table.
void write_calibration(std::ostream& out, const CalibrationResult& cal);
CalibrationResult read_calibration(std::istream& in);

/// Flat key=value lines: statistic, observed, lambda_alpha, p_value, reject,
/// alpha, M, seed, degenerate and (when present) note.
std::string format_test_result(const TestResult& r);

void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string tool_version;
  double elapsed_seconds = 0.0;
  std::string started_utc;

  /// SHA-256 of the canonical (key-sorted) serialization of `config`.
  std::string config_digest() const;
  nlohmann::json to_json() const;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace threshtest::io
