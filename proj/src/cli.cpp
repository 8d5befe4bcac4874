#include "threshtest/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "threshtest/calibration.hpp"
#include "threshtest/inference.hpp"
#include "threshtest/io.hpp"
#include "threshtest/rng.hpp"
#include "threshtest/simulation.hpp"
#include "threshtest/svg.hpp"

namespace threshtest::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Untestable:
    case ErrorKind::NotApplicable:
    case ErrorKind::Degenerate:
      return kUntestable;
    case ErrorKind::Parse:
    case ErrorKind::InvalidSpec:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::RankDeficient:
    case ErrorKind::InsufficientDraws:
    case ErrorKind::StatisticMismatch:
    case ErrorKind::DomainError:
    case ErrorKind::UnsupportedDimension:
      return kUsage;
    default:
      return kInternal;
  }
}

namespace {

struct Options {
  std::string data;
  std::string response = "y";
  bool intercept = false;
  std::string hypothesis;
  std::string stat = "sqrt_affine_lasso";
  std::string family = "gaussian";
  double alpha = 0.05;
  std::size_t mc = 2000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  std::string plot;
  std::string config;
  // region lattice
  double lo = 0.0, hi = 0.0, lo2 = 0.0, hi2 = 0.0;
  std::size_t points = 201, points2 = 51;
};

class Clock {
 public:
  Clock() : start_(std::chrono::steady_clock::now()) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    started_ = buf;
  }
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  const std::string& started() const { return started_; }

 private:
  std::chrono::steady_clock::time_point start_;
  std::string started_;
};

io::RunManifest make_manifest(const std::string& command, json config, std::uint64_t seed,
                              const Clock& clock) {
  io::RunManifest m;
  m.command = command;
  m.config = std::move(config);
  m.seed = seed;
  m.tool_version = kToolVersion;
  m.elapsed_seconds = clock.elapsed();
  m.started_utc = clock.started();
  return m;
}

fs::path manifest_path_for(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

void emit(const Options& opt, const std::string& text, const io::RunManifest& manifest,
          std::ostream& out) {
  if (opt.out.empty()) {
    out << text;
    return;
  }
  io::write_text_file(opt.out, text);
  io::write_manifest(manifest_path_for(opt.out), manifest);
}

std::string file_digest(const std::string& path) { return sha256_hex(io::read_text_file(path)); }

json input_config(const Options& opt) {
  json c;
  c["data"] = opt.data;
  c["data_sha256"] = file_digest(opt.data);
  c["response"] = opt.response;
  c["intercept"] = opt.intercept;
  c["hypothesis"] = opt.hypothesis;
  c["hypothesis_sha256"] = file_digest(opt.hypothesis);
  c["stat"] = opt.stat;
  c["family"] = opt.family;
  c["alpha"] = opt.alpha;
  c["mc"] = opt.mc;
  c["seed"] = opt.seed;
  return c;
}

void check_common(const Options& opt) {
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "--alpha must lie in (0, 1)");
  }
  threshold_rank(opt.mc, opt.alpha);
}

bool is_composite(const std::string& stat) { return stat == "oplus" || stat == "glm_oplus"; }

StatisticSpec make_spec(const std::string& name, const std::string& family) {
  StatisticSpec spec;
  spec.family = parse_stat_family(name);
  spec.glm_family = GlmFamily(parse_family(family));
  return spec;
}

McConfig mc_config(const Options& opt) {
  McConfig mc;
  mc.m_draws = opt.mc;
  mc.seed = opt.seed;
  mc.threads = opt.threads;
  return mc;
}

/// Seeds `mem` from THRESHTEST_CACHE_DIR when set: a stored table is reused,
/// a missing one is computed and stored.
std::shared_ptr<const CalibrationResult> cached_calibration(const PreparedStatistic& stat,
                                                            const NullModel& model, double alpha,
                                                            const McConfig& mc,
                                                            CalibrationCache& mem) {
  const std::string key = calibration_key(stat, model, mc, alpha);
  return mem.single.get_or_compute(key, [&]() -> CalibrationResult {
    const char* dir = std::getenv("THRESHTEST_CACHE_DIR");
    if (dir == nullptr || *dir == '\0') return *calibration_for(stat, model, alpha, mc, nullptr);
    const fs::path file = fs::path(dir) / (sha256_hex(key) + ".csv");
    if (fs::exists(file)) {
      std::ifstream in(file);
      try {
        CalibrationResult cal = io::read_calibration(in);
        if (cal.statistic_id == stat.spec().id() && cal.m_draws == mc.m_draws &&
            cal.seed == mc.seed && cal.alpha == alpha) {
          return cal;
        }
      } catch (const Error&) {
        // unreadable entry: recompute and overwrite
      }
    }
    CalibrationResult cal = *calibration_for(stat, model, alpha, mc, nullptr);
    fs::create_directories(file.parent_path());
    const fs::path tmp = fs::path(file.string() + ".tmp" + std::to_string(stable_hash(key)));
    {
      std::ofstream os(tmp, std::ios::binary);
      io::write_calibration(os, cal);
    }
    fs::rename(tmp, file);
    return cal;
  });
}

struct Inputs {
  io::Dataset data;
  LinearHypothesis hyp;
};

Inputs load_inputs(const Options& opt) {
  io::Dataset ds = io::read_dataset_csv(opt.data, opt.response, opt.intercept);
  LinearHypothesis hyp = io::read_hypothesis_file(opt.hypothesis, ds.x.cols());
  return {std::move(ds), std::move(hyp)};
}

std::pair<PreparedStatistic, PreparedStatistic> composite_pair(const Options& opt,
                                                               const Inputs& in) {
  const bool glm = opt.stat == "glm_oplus";
  StatisticSpec s1 = make_spec(glm ? "glm_score_sup" : "sqrt_affine_lasso", opt.family);
  StatisticSpec s2 = make_spec(glm ? "glm_score_group" : "sqrt_affine_group_lasso", opt.family);
  if (!in.hyp.has_explicit_partition()) s2.row_partition = whole_partition(in.hyp.rows());
  return {PreparedStatistic(s1, in.data.x, in.hyp), PreparedStatistic(s2, in.data.x, in.hyp)};
}

int cmd_test(const Options& opt, std::ostream& out) {
  Clock clock;
  check_common(opt);
  const Inputs in = load_inputs(opt);
  const McConfig mc = mc_config(opt);
  TestResult result;
  if (is_composite(opt.stat)) {
    auto [s1, s2] = composite_pair(opt, in);
    result = run_composite(in.data.y, s1, s2, opt.alpha, mc);
  } else {
    const PreparedStatistic stat(make_spec(opt.stat, opt.family), in.data.x, in.hyp);
    if (stat.spec().is_glm()) stat.spec().glm_family.check_support(in.data.y);
    CalibrationCache mem;
    cached_calibration(stat, default_null_model(stat, in.data.y), opt.alpha, mc, mem);
    result = run_test(in.data.y, stat, opt.alpha, mc, &mem);
  }
  emit(opt, io::format_test_result(result),
       make_manifest("test", input_config(opt), opt.seed, clock), out);
  return kOk;
}

int cmd_calibrate(const Options& opt, std::ostream& out) {
  Clock clock;
  check_common(opt);
  if (is_composite(opt.stat)) {
    throw Error(ErrorKind::InvalidSpec, "calibrate takes a single statistic, not a composite");
  }
  const Inputs in = load_inputs(opt);
  const PreparedStatistic stat(make_spec(opt.stat, opt.family), in.data.x, in.hyp);
  if (stat.spec().is_glm()) stat.spec().glm_family.check_support(in.data.y);
  CalibrationCache mem;
  const auto cal = cached_calibration(stat, default_null_model(stat, in.data.y), opt.alpha,
                                      mc_config(opt), mem);
  std::ostringstream os;
  io::write_calibration(os, *cal);
  emit(opt, os.str(), make_manifest("calibrate", input_config(opt), opt.seed, clock), out);
  return kOk;
}

std::vector<double> axis(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo < hi)) throw Error(ErrorKind::InvalidSpec, "lattice needs lo < hi and >= 2 points");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

int cmd_region(const Options& opt, std::ostream& out) {
  Clock clock;
  check_common(opt);
  const Inputs in = load_inputs(opt);
  const Index r = in.hyp.rows();
  if (r > 2) {
    throw Error(ErrorKind::UnsupportedDimension,
                "lattice regions support R <= 2 (R = " + std::to_string(r) + ")");
  }
  const StatisticSpec spec = make_spec(opt.stat, opt.family);
  const ConfidenceRegion probe(in.data.y, in.data.x, in.hyp.a(), spec, 0.0);
  CalibrationCache mem;
  const auto cal = cached_calibration(probe.statistic(),
                                      default_null_model(probe.statistic(), in.data.y),
                                      opt.alpha, mc_config(opt), mem);
  const ConfidenceRegion region(in.data.y, in.data.x, in.hyp.a(), spec, cal->lambda_alpha);

  CrLattice lattice;
  lattice.axis1 = axis(opt.lo, opt.hi, opt.points);
  if (r == 2) lattice.axis2 = axis(opt.lo2, opt.hi2, opt.points2);
  const CrGridResult grid = cr_grid(region, lattice);

  std::ostringstream os;
  os << (r == 1 ? "c,member\n" : "c1,c2,member\n");
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    for (Index k = 0; k < r; ++k) os << io::format_double(grid.points[i](k)) << ',';
    os << (grid.member[i] ? 1 : 0) << '\n';
  }
  json config = input_config(opt);
  config["lattice"] = {{"lo", opt.lo}, {"hi", opt.hi}, {"points", opt.points}};
  if (r == 2) config["lattice2"] = {{"lo", opt.lo2}, {"hi", opt.hi2}, {"points", opt.points2}};
  const io::RunManifest manifest = make_manifest("region", config, opt.seed, clock);
  emit(opt, os.str(), manifest, out);

  if (!opt.plot.empty()) {
    svg::Panel panel;
    panel.title = "confidence region, " + spec.id() + ", alpha=" + io::format_double(opt.alpha);
    svg::Series in_set{"member", {}, {}, true};
    if (r == 1) {
      panel.x_label = "c";
      panel.y_label = "lambda_CR(c) / lambda_alpha";
      svg::Series curve{"lambda_CR / lambda_alpha", {}, {}, false};
      for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const double c = grid.points[i](0);
        const StatValue v = region.lambda_cr(grid.points[i]);
        curve.x.push_back(c);
        curve.y.push_back(v.degenerate ? 0.0 : v.value / cal->lambda_alpha);
        if (grid.member[i]) {
          in_set.x.push_back(c);
          in_set.y.push_back(0.0);
        }
      }
      svg::Series level{"threshold", {lattice.axis1.front(), lattice.axis1.back()}, {1.0, 1.0}};
      panel.series = {curve, level, in_set};
    } else {
      panel.x_label = "c1";
      panel.y_label = "c2";
      for (std::size_t i = 0; i < grid.points.size(); ++i) {
        if (!grid.member[i]) continue;
        in_set.x.push_back(grid.points[i](0));
        in_set.y.push_back(grid.points[i](1));
      }
      panel.series = {in_set};
    }
    io::write_text_file(opt.plot, svg::render({panel}, 1, 1));
    io::write_manifest(manifest_path_for(opt.plot), manifest);
  }
  return kOk;
}

// ---- power / level ----

struct Sweep {
  std::vector<Index> p_values;
  std::vector<std::string> families;
  json s_values;  // ints and/or "sparse" / "dense"
  ExperimentConfig base;
};

Index dense_s(Index p) { return p <= 100 ? p : p / 2; }

std::vector<Index> resolve_s(const json& spec, Index p) {
  std::vector<Index> out;
  for (const auto& item : spec) {
    Index s = 0;
    if (item.is_string()) {
      const auto name = item.get<std::string>();
      if (name == "sparse") s = 1;
      else if (name == "dense") s = dense_s(p);
      else throw Error(ErrorKind::Parse, "s_values entries are integers, \"sparse\" or \"dense\"");
    } else if (item.is_number_integer()) {
      s = item.get<Index>();
    } else {
      throw Error(ErrorKind::Parse, "s_values entries are integers, \"sparse\" or \"dense\"");
    }
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

template <class T>
std::vector<T> scalar_or_list(const json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

json load_config_document(const std::string& path) {
  json doc;
  try {
    doc = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "config: " + std::string(e.what()));
  }
  // a run manifest can be passed back in directly
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) return doc["config"];
  return doc;
}

Sweep parse_sweep(json doc, const Options& opt, const CLI::App& sub, bool level) {
  static const std::set<std::string> known{"n",       "p",          "family",   "beta0",
                                           "alpha",   "m_calib",    "n_reps",   "theta_grid",
                                           "s_values", "methods",   "seed",     "design"};
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw Error(ErrorKind::Parse, "unknown config field '" + key + "'");
  }
  // command-line flags win over the document
  if (sub.count("--seed")) doc["seed"] = opt.seed;
  if (sub.count("--mc")) doc["m_calib"] = opt.mc;
  if (sub.count("--alpha")) doc["alpha"] = opt.alpha;

  Sweep sw;
  ExperimentConfig& c = sw.base;
  try {
    c.n = doc.value("n", Index{100});
    sw.p_values = scalar_or_list<Index>(doc.value("p", json(10)));
    sw.families = scalar_or_list<std::string>(doc.value("family", json("gaussian")));
    c.beta0 = doc.value("beta0", -2.0);
    c.alpha = doc.value("alpha", 0.05);
    c.m_calib = doc.value("m_calib", std::size_t{2000});
    c.n_reps = doc.value("n_reps", std::size_t{1000});
    c.theta_grid = level ? std::vector<double>{0.0}
                         : doc.value("theta_grid", std::vector<double>{0.0});
    sw.s_values = doc.value("s_values", json::array({"sparse"}));
    c.methods = doc.value("methods", std::vector<std::string>{});
    c.seed = doc.value("seed", std::uint64_t{1});
    if (doc.contains("design")) {
      const json& d = doc["design"];
      const std::string cov = d.value("covariance", std::string("ar1"));
      if (cov == "ar1") c.design.covariance = CovarianceKind::Ar1;
      else if (cov == "identity") c.design.covariance = CovarianceKind::Identity;
      else throw Error(ErrorKind::Parse, "design.covariance is \"ar1\" or \"identity\"");
      c.design.rho = d.value("rho", 0.5);
      c.design.standardize = d.value("standardize", true);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "config: " + std::string(e.what()));
  }
  if (!sw.s_values.is_array()) throw Error(ErrorKind::Parse, "s_values must be a list");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(ErrorKind::InvalidSpec, "alpha must lie in (0, 1)");
  threshold_rank(c.m_calib, c.alpha);
  for (const auto& f : sw.families) parse_family(f);
  c.threads = opt.threads;
  return sw;
}

json resolved_config(const Sweep& sw, bool level) {
  const auto& c = sw.base;
  json j;
  j["n"] = c.n;
  j["p"] = sw.p_values;
  j["family"] = sw.families;
  j["beta0"] = c.beta0;
  j["alpha"] = c.alpha;
  j["m_calib"] = c.m_calib;
  j["n_reps"] = c.n_reps;
  if (!level) j["theta_grid"] = c.theta_grid;
  j["s_values"] = sw.s_values;
  j["methods"] = c.methods;
  j["seed"] = c.seed;
  j["design"] = {{"covariance", c.design.covariance == CovarianceKind::Ar1 ? "ar1" : "identity"},
                 {"rho", c.design.rho},
                 {"standardize", c.design.standardize}};
  return j;
}

std::string series_label(const PowerRow& r, bool with_s) {
  return with_s ? r.statistic_id + " s=" + std::to_string(r.s) : r.statistic_id;
}

int cmd_sweep(const Options& opt, const CLI::App& sub, bool level, std::ostream& out,
              std::ostream& err) {
  Clock clock;
  if (opt.config.empty()) throw Error(ErrorKind::InvalidSpec, "--config is required");
  if (opt.out.empty()) throw Error(ErrorKind::InvalidSpec, "--out (output directory) is required");
  const Sweep sw = parse_sweep(load_config_document(opt.config), opt, sub, level);
  const std::string command = level ? "level" : "power";
  const fs::path dir(opt.out);
  fs::create_directories(dir);

  // power[family][p] rows, kept for the plot
  std::map<std::string, std::map<Index, std::vector<PowerRow>>> tables;
  for (const auto& fam : sw.families) {
    for (Index p : sw.p_values) {
      ExperimentConfig cfg = sw.base;
      cfg.p = p;
      cfg.family = GlmFamily(parse_family(fam));
      const std::string family_name(cfg.family.name());
      cfg.s_values = resolve_s(sw.s_values, p);
      cfg.seed = derive_seed(sw.base.seed,
                             stable_hash("scenario:family=" + family_name + ";p=" + std::to_string(p)));
      const PowerTable table = level ? estimate_level(cfg) : estimate_power(cfg);
      for (const auto& w : table.warnings) err << "warning: " << family_name << " p=" << p << ": " << w << '\n';
      std::ostringstream os;
      io::write_power_csv(os, table.rows);
      const fs::path file = dir / (command + "_" + family_name + "_p" + std::to_string(p) + ".csv");
      io::write_text_file(file, os.str());
      out << file.string() << '\n';
      tables[family_name][p] = table.rows;
    }
  }
  const json config = resolved_config(sw, level);
  io::write_manifest(dir / "manifest.json", make_manifest(command, config, sw.base.seed, clock));

  if (!opt.plot.empty()) {
    std::vector<svg::Panel> panels;
    int rows = 0;
    int cols = 0;
    if (level) {
      // one panel per family, level against P
      for (const auto& [fam, by_p] : tables) {
        svg::Panel panel;
        panel.title = fam;
        panel.x_label = "P";
        panel.y_label = "empirical level";
        std::map<std::string, svg::Series> series;
        for (const auto& [p, rows_p] : by_p) {
          for (const auto& r : rows_p) {
            auto& s = series[r.statistic_id];
            s.label = r.statistic_id;
            s.x.push_back(static_cast<double>(p));
            s.y.push_back(r.power_estimate);
          }
        }
        for (auto& [id, s] : series) panel.series.push_back(std::move(s));
        panel.series.push_back({"nominal", {static_cast<double>(sw.p_values.front()),
                                            static_cast<double>(sw.p_values.back())},
                                {sw.base.alpha, sw.base.alpha}});
        panel.y_lo = 0.0;
        panel.y_hi = std::max(0.2, 3 * sw.base.alpha);
        panels.push_back(std::move(panel));
      }
      rows = static_cast<int>(panels.size());
      cols = 1;
    } else {
      for (const auto& [fam, by_p] : tables) {
        for (const auto& [p, rows_p] : by_p) {
          svg::Panel panel;
          panel.title = fam + ", P=" + std::to_string(p);
          panel.x_label = "theta";
          panel.y_label = "power";
          panel.y_lo = 0.0;
          panel.y_hi = 1.0;
          std::set<Index> distinct_s;
          for (const auto& r : rows_p) distinct_s.insert(r.s);
          const bool with_s = distinct_s.size() > 1;
          std::vector<std::string> order;
          std::map<std::string, svg::Series> series;
          for (const auto& r : rows_p) {
            const std::string label = series_label(r, with_s);
            if (!series.count(label)) order.push_back(label);
            auto& s = series[label];
            s.label = label;
            s.x.push_back(r.theta);
            s.y.push_back(r.power_estimate);
          }
          for (const auto& label : order) panel.series.push_back(series[label]);
          panels.push_back(std::move(panel));
        }
      }
      rows = static_cast<int>(tables.size());
      cols = static_cast<int>(sw.p_values.size());
    }
    io::write_text_file(opt.plot, svg::render(panels, std::max(rows, 1), std::max(cols, 1),
                                              level ? "empirical level" : "power"));
    io::write_manifest(manifest_path_for(opt.plot),
                       make_manifest(command, config, sw.base.seed, clock));
  }
  return kOk;
}

void add_common(CLI::App* sub, Options& opt, bool with_inputs) {
  if (with_inputs) {
    sub->add_option("--data", opt.data, "CSV with a header row")->required();
    sub->add_option("--response", opt.response, "name of the response column");
    sub->add_flag("--intercept", opt.intercept, "prepend an all-ones column");
    sub->add_option("--hypothesis", opt.hypothesis, "JSON hypothesis document")->required();
    sub->add_option("--stat", opt.stat,
                    "statistic: affine_lasso, affine_group_lasso, sqrt_affine_lasso, "
                    "sqrt_affine_group_lasso, fisher_weighted, lad_sign, glm_score_sup, "
                    "glm_score_group, oplus, glm_oplus");
    sub->add_option("--family", opt.family, "response family for GLM statistics");
  }
  sub->add_option("--alpha", opt.alpha, "test level");
  sub->add_option("--mc", opt.mc, "Monte-Carlo draws for calibration");
  sub->add_option("--seed", opt.seed, "random seed");
  sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
  sub->add_option("--out", opt.out, "output file (directory for power/level)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"thresholding tests for linear hypotheses", "threshtest"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Options opt;

  auto* test = app.add_subcommand("test", "run a thresholding test");
  add_common(test, opt, true);
  auto* calibrate = app.add_subcommand("calibrate", "write the Monte-Carlo null table");
  add_common(calibrate, opt, true);
  auto* region = app.add_subcommand("region", "confidence region on a lattice (R <= 2)");
  add_common(region, opt, true);
  region->add_option("--lo", opt.lo, "first axis lower end")->required();
  region->add_option("--hi", opt.hi, "first axis upper end")->required();
  region->add_option("--points", opt.points, "first axis lattice size");
  region->add_option("--lo2", opt.lo2, "second axis lower end (R = 2)");
  region->add_option("--hi2", opt.hi2, "second axis upper end (R = 2)");
  region->add_option("--points2", opt.points2, "second axis lattice size (R = 2)");
  region->add_option("--plot", opt.plot, "SVG output");
  auto* power = app.add_subcommand("power", "power simulation");
  add_common(power, opt, false);
  power->add_option("--config", opt.config, "JSON experiment config or run manifest");
  power->add_option("--plot", opt.plot, "SVG output");
  auto* level = app.add_subcommand("level", "level simulation (theta = 0)");
  add_common(level, opt, false);
  level->add_option("--config", opt.config, "JSON experiment config or run manifest");
  level->add_option("--plot", opt.plot, "SVG output");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*test) return cmd_test(opt, out);
    if (*calibrate) return cmd_calibrate(opt, out);
    if (*region) return cmd_region(opt, out);
    if (*power) return cmd_sweep(opt, *power, false, out, err);
    if (*level) return cmd_sweep(opt, *level, true, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: Parse: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace threshtest::cli
