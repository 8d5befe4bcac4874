#include "threshtest/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "threshtest/errors.hpp"
#include "threshtest/rng.hpp"

namespace threshtest::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open '" + path.string() + "'");
  return in;
}

Vector json_vector(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, std::string(what) + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::Parse, std::string(what) + " must hold numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != last) {
    throw Error(ErrorKind::Parse, "not a number: '" + t + "'");
  }
  return v;
}

Dataset read_dataset_csv(std::istream& in, const std::string& response, bool add_intercept) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "data file is empty");
  const auto header = split_commas(line);
  Index response_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == response) response_col = static_cast<Index>(i);
  }
  if (response_col < 0) throw Error(ErrorKind::Parse, "no column named '" + response + "'");
  if (header.size() < 2) throw Error(ErrorKind::Parse, "data needs a response and a covariate");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " fields, expected " +
                                        std::to_string(header.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        row.push_back(parse_double(c));
      } catch (const Error&) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": not a number: '" + c + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(header.size()) - 1;
  Matrix cov(n, p);
  Vector y(n);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<Index>(j) != response_col) names.push_back(header[j]);
  }
  for (Index i = 0; i < n; ++i) {
    Index k = 0;
    for (Index j = 0; j <= p; ++j) {
      const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (j == response_col) {
        y(i) = v;
      } else {
        cov(i, k++) = v;
      }
    }
  }
  if (!y.allFinite()) throw Error(ErrorKind::Parse, "response contains non-finite values");
  if (add_intercept) return {DesignMatrix::with_intercept(cov, names), y};
  return {DesignMatrix(std::move(cov), names), y};
}

Dataset read_dataset_csv(const std::filesystem::path& path, const std::string& response,
                         bool add_intercept) {
  auto in = open_in(path);
  return read_dataset_csv(in, response, add_intercept);
}

LinearHypothesis parse_hypothesis(const nlohmann::json& doc, Index p) {
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "hypothesis must be a JSON object");
  if (doc.contains("subset")) {
    const auto& s = doc["subset"];
    if (!s.contains("j0") || !s["j0"].is_number_integer()) {
      throw Error(ErrorKind::Parse, "subset.j0 must be an integer");
    }
    SubsetHypothesis sub;
    sub.j0 = s["j0"].get<Index>();
    if (sub.j0 < 0 || sub.j0 >= p) throw Error(ErrorKind::InvalidSpec, "subset needs 0 <= j0 < P");
    sub.c = s.contains("c") ? json_vector(s["c"], "subset.c") : Vector::Zero(p - sub.j0);
    return sub.expand(p);
  }
  if (!doc.contains("A")) throw Error(ErrorKind::Parse, "hypothesis needs \"A\" or \"subset\"");
  const auto& rows = doc["A"];
  if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::Parse, "A must be a nonempty row list");
  Matrix a(static_cast<Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vector row = json_vector(rows[i], "A row");
    if (row.size() != p) {
      throw Error(ErrorKind::DimensionMismatch, "A row " + std::to_string(i) + " has " +
                                                    std::to_string(row.size()) +
                                                    " entries, design has " + std::to_string(p));
    }
    a.row(static_cast<Index>(i)) = row.transpose();
  }
  const Vector c = doc.contains("c") ? json_vector(doc["c"], "c") : Vector::Zero(a.rows());
  std::optional<RowPartition> groups;
  if (doc.contains("groups")) {
    RowPartition part;
    for (const auto& g : doc["groups"]) {
      std::vector<Index> block;
      for (const auto& i : g) block.push_back(i.get<Index>());
      part.push_back(std::move(block));
    }
    groups = std::move(part);
  }
  return LinearHypothesis(std::move(a), c, std::move(groups));
}

LinearHypothesis read_hypothesis_file(const std::filesystem::path& path, Index p) {
  auto in = open_in(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "hypothesis file: " + std::string(e.what()));
  }
  return parse_hypothesis(doc, p);
}

void write_calibration(std::ostream& out, const CalibrationResult& cal) {
  out << "# threshtest calibration v1\n";
  out << "# statistic_id=" << cal.statistic_id << '\n';
  out << "# m_draws=" << cal.m_draws << '\n';
  out << "# alpha=" << format_double(cal.alpha) << '\n';
  out << "# seed=" << cal.seed << '\n';
  out << "# lambda_alpha=" << format_double(cal.lambda_alpha) << '\n';
  out << "# n_degenerate=" << cal.n_degenerate << '\n';
  if (cal.exact) out << "# exact_f=" << cal.exact->df1 << ',' << cal.exact->df2 << '\n';
  out << "draw,value\n";
  for (std::size_t i = 0; i < cal.sorted_null_stats.size(); ++i) {
    out << (i + 1) << ',' << format_double(cal.sorted_null_stats[i]) << '\n';
  }
}

CalibrationResult read_calibration(std::istream& in) {
  CalibrationResult cal;
  std::string line;
  bool in_table = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!in_table && line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      if (key == "statistic_id") cal.statistic_id = val;
      else if (key == "m_draws") cal.m_draws = static_cast<std::size_t>(parse_double(val));
      else if (key == "alpha") cal.alpha = parse_double(val);
      else if (key == "seed") cal.seed = std::stoull(val);
      else if (key == "lambda_alpha") cal.lambda_alpha = parse_double(val);
      else if (key == "n_degenerate") cal.n_degenerate = static_cast<std::size_t>(parse_double(val));
      else if (key == "exact_f") {
        const auto comma = val.find(',');
        cal.exact = FisherReference{static_cast<Index>(parse_double(val.substr(0, comma))),
                                    static_cast<Index>(parse_double(val.substr(comma + 1)))};
      }
      continue;
    }
    if (!in_table) {
      if (trim(line) != "draw,value") throw Error(ErrorKind::Parse, "calibration table header missing");
      in_table = true;
      continue;
    }
    const auto cells = split_commas(line);
    if (cells.size() != 2) throw Error(ErrorKind::Parse, "calibration row needs two fields");
    cal.sorted_null_stats.push_back(parse_double(cells[1]));
  }
  if (cal.sorted_null_stats.size() != cal.m_draws) {
    throw Error(ErrorKind::Parse, "calibration table has " +
                                      std::to_string(cal.sorted_null_stats.size()) +
                                      " draws, header says " + std::to_string(cal.m_draws));
  }
  if (!std::is_sorted(cal.sorted_null_stats.begin(), cal.sorted_null_stats.end())) {
    throw Error(ErrorKind::Parse, "calibration draws are not sorted");
  }
  return cal;
}

std::string format_test_result(const TestResult& r) {
  std::ostringstream os;
  os << "statistic=" << r.statistic_id << '\n';
  os << "observed=" << format_double(r.observed.value) << '\n';
  os << "lambda_alpha=" << format_double(r.lambda_alpha) << '\n';
  os << "p_value=" << format_double(r.p_value) << '\n';
  os << "reject=" << (r.reject ? "true" : "false") << '\n';
  os << "alpha=" << format_double(r.alpha) << '\n';
  os << "M=" << r.m_draws << '\n';
  os << "seed=" << r.seed << '\n';
  os << "degenerate=" << (r.observed.degenerate ? "true" : "false") << '\n';
  if (r.degenerate_note) os << "note=" << *r.degenerate_note << '\n';
  return os.str();
}

void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows) {
  out << "statistic_id,family,s,theta,power_estimate,mc_standard_error,n_reps,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
    }
    out << r.statistic_id << ',' << r.family << ',' << r.s << ',' << format_double(r.theta) << ','
        << format_double(r.power_estimate) << ',' << format_double(r.mc_standard_error) << ','
        << r.n_reps << ',' << status << '\n';
  }
}

std::string RunManifest::config_digest() const { return sha256_hex(config.dump()); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["config_digest"] = config_digest();
  j["seed"] = seed;
  j["tool_version"] = tool_version;
  j["timing"] = {{"started_utc", started_utc}, {"elapsed_seconds", elapsed_seconds}};
  return j;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  write_text_file(path, manifest.to_json().dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Parse, "cannot write '" + path.string() + "'");
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Parse, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace threshtest::io
