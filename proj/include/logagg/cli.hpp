#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "logagg/csv.hpp"
#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/evalbench.hpp"
#include "logagg/marginal.hpp"
#include "logagg/pipeline.hpp"
#include "logagg/simgen.hpp"

namespace logagg::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Ordered key/value record of a resolved configuration; written as the
/// comment header of every output file.
class Metadata {
 public:
  template <typename T>
  Metadata& add(std::string key, const T& value) {
    std::ostringstream os;
    os << value;
    entries_.emplace_back(std::move(key), os.str());
    return *this;
  }
  Metadata& add(std::string key, double value) {
    entries_.emplace_back(std::move(key), format_real(value));
    return *this;
  }
  Metadata& add(std::string key, bool value) {
    entries_.emplace_back(std::move(key), value ? "true" : "false");
    return *this;
  }

  std::vector<std::string> comment_lines(const std::string& command) const {
    std::vector<std::string> lines{"logagg " + std::string(kVersion) + " " + command};
    for (const auto& [k, v] : entries_) lines.push_back(k + "=" + v);
    return lines;
  }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::ofstream open_output(const std::filesystem::path& path, const Metadata& meta, const std::string& command) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write '" + path.string() + "'");
  for (const auto& line : meta.comment_lines(command)) out << "# " << line << '\n';
  return out;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw validation_error("cannot create output directory '" + dir.string() + "'");
}

inline std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  ScenarioSpec scenario{};
  std::size_t test_n = 3000;
  std::filesystem::path out_dir = ".";

  void validate() const {
    scenario.validate();
    if (test_n < 2) throw validation_error("--test-n must be >= 2");
    if (scenario.model != CovariateModel::independent) banded_cholesky(scenario_precision(scenario));
  }
};

inline Metadata scenario_metadata(const ScenarioSpec& s) {
  Metadata m;
  m.add("model", to_string(s.model)).add("n", s.n).add("p", s.p).add("block", s.correlated_block);
  m.add("rho1", s.rho1).add("rho2_lag1", s.rho2_lag1).add("rho2_lag2", s.rho2_lag2);
  return m;
}

/// Writes train.csv, test.csv and truth.csv (feature, index, coefficient).
inline void run_simulate(const SimulateOptions& opts) {
  opts.validate();
  ensure_directory(opts.out_dir);
  Metadata meta = scenario_metadata(opts.scenario);
  meta.add("seed", opts.scenario.seed).add("test_n", opts.test_n);
  const auto comments = meta.comment_lines("simulate");

  write_csv(opts.out_dir / "train.csv", simulate(opts.scenario), comments);
  write_csv(opts.out_dir / "test.csv", simulate_test(opts.scenario, opts.test_n), comments);

  const auto truth = true_theta(opts.scenario.p);
  auto out = open_output(opts.out_dir / "truth.csv", meta, "simulate");
  out << "feature,index,coefficient\n";
  const auto names = default_feature_names(opts.scenario.p);
  for (std::size_t j = 0; j < opts.scenario.p; ++j)
    out << names[j] << ',' << j << ',' << format_real(truth.theta[static_cast<Eigen::Index>(j)]) << '\n';
}

// ------------------------------------------------------------------ screen

struct ScreenOptions {
  std::filesystem::path input;
  CsvOptions csv{};
  double threshold = 0.01;
  double bonferroni_level = 0.05;
  bool write_filtered = false;
  std::filesystem::path out_dir = ".";

  void validate() const {
    if (input.empty()) throw validation_error("--input is required");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw validation_error("--threshold must lie in [0, 1]");
    if (!(bonferroni_level > 0.0 && bonferroni_level < 1.0)) throw validation_error("--bonferroni must lie in (0, 1)");
  }
};

struct ScreenSummary {
  std::size_t features = 0;
  std::size_t retained = 0;
  std::size_t bonferroni = 0;
};

/// Single-feature Wald tests; writes pvalues.csv and retained.csv, and
/// optionally filtered.csv holding only the retained columns.
inline ScreenSummary run_screen(const ScreenOptions& opts, std::ostream& log = std::cerr) {
  opts.validate();
  const Dataset data = load_csv(opts.input, opts.csv);
  ensure_directory(opts.out_dir);

  const auto results = single_locus_pvalues(data);
  const auto kept = pvalue_filter(results, opts.threshold);
  const auto bonf = bonferroni_select(results, opts.bonferroni_level);

  Metadata meta;
  meta.add("input", opts.input.string()).add("label", opts.csv.label_column).add("threshold", opts.threshold);
  meta.add("bonferroni_level", opts.bonferroni_level).add("test", std::string("wald"));
  meta.add("features", data.p()).add("retained", kept.size()).add("bonferroni_selected", bonf.size());

  {
    auto out = open_output(opts.out_dir / "pvalues.csv", meta, "screen");
    out << "feature,index,coefficient,std_error,p_value,flag\n";
    for (const auto& r : results) {
      const char* flag = r.degenerate ? "degenerate" : r.separated ? "separated" : "";
      out << data.feature_names()[r.feature] << ',' << r.feature << ',' << format_real(r.coefficient) << ','
          << format_real(r.std_error) << ',' << format_real(r.p_value) << ',' << flag << '\n';
    }
  }
  {
    auto out = open_output(opts.out_dir / "retained.csv", meta, "screen");
    out << "feature,index\n";
    for (std::size_t j : kept) out << data.feature_names()[j] << ',' << j << '\n';
  }
  if (kept.empty()) log << "warning: no feature has p-value <= " << opts.threshold << "; nothing retained\n";
  if (opts.write_filtered && !kept.empty()) {
    MatrixXd x(data.x().rows(), static_cast<Eigen::Index>(kept.size()));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < kept.size(); ++c) {
      x.col(static_cast<Eigen::Index>(c)) = data.x().col(static_cast<Eigen::Index>(kept[c]));
      names.push_back(data.feature_names()[kept[c]]);
    }
    write_csv(opts.out_dir / "filtered.csv", Dataset(std::move(x), data.y(), std::move(names)),
              meta.comment_lines("screen"), opts.csv.label_column);
  }
  return {data.p(), kept.size(), bonf.size()};
}

// --------------------------------------------------------------------- fit

/// Parses "l1cv", "none", "marginal" or "marginal:THRESHOLD".
inline ScreenSpec parse_screen(const std::string& text) {
  if (text == "l1cv") return {ScreenKind::l1cv, 0.01};
  if (text == "none") return {ScreenKind::none, 0.01};
  if (text.rfind("marginal", 0) == 0) {
    ScreenSpec spec{ScreenKind::marginal, 0.01};
    if (text.size() > 8) {
      if (text[8] != ':') throw validation_error("bad --screen value '" + text + "'");
      const auto value = csv_detail::parse_double(std::string_view(text).substr(9));
      if (!value || !(*value > 0.0 && *value <= 1.0))
        throw validation_error("marginal screen threshold must lie in (0, 1], got '" + text.substr(9) + "'");
      spec.threshold = *value;
    }
    return spec;
  }
  throw validation_error("unknown --screen value '" + text + "' (expected l1cv, marginal[:THRESH] or none)");
}

inline std::string to_string(const ScreenSpec& s) {
  switch (s.kind) {
    case ScreenKind::l1cv: return "l1cv";
    case ScreenKind::none: return "none";
    case ScreenKind::marginal: return "marginal:" + format_real(s.threshold);
  }
  return "?";
}

struct FitCmdOptions {
  std::filesystem::path input;
  CsvOptions csv{};
  LaConfig la{};
  std::filesystem::path out_dir = ".";

  void validate() const {
    if (input.empty()) throw validation_error("--input is required");
    if (!(la.split_ratio > 0.0 && la.split_ratio < 1.0)) throw validation_error("--split-ratio must lie in (0, 1)");
    if (la.mh.iterations < 1) throw validation_error("--iters must be >= 1");
    if (la.cv_folds < 2) throw validation_error("--cv-folds must be >= 2");
    if (la.lambda_count < 1) throw validation_error("--lambda-count must be >= 1");
  }
};

/// Runs the full split, screen, aggregate pipeline; writes coefficients.csv,
/// trace.csv and metadata.csv.
inline LaResult run_fit(const FitCmdOptions& opts) {
  opts.validate();
  const Dataset data = load_csv(opts.input, opts.csv);
  ensure_directory(opts.out_dir);
  const LaResult result = la_fit(data, opts.la);
  const auto& est = result.estimate;

  std::vector<std::string> candidate_names;
  for (std::size_t j : result.candidates.features) candidate_names.push_back(data.feature_names()[j]);

  Metadata meta;
  meta.add("input", opts.input.string()).add("label", opts.csv.label_column).add("header", opts.csv.has_header);
  meta.add("split_ratio", opts.la.split_ratio).add("stratified", opts.la.stratified);
  meta.add("screen", to_string(opts.la.screen));
  meta.add("prior_p", std::string(opts.la.prior_mode == PriorMode::global ? "global" : "candidates"));
  meta.add("burnin", opts.la.mh.burnin).add("iters", opts.la.mh.iterations);
  meta.add("max_size", est.max_pattern_size).add("intercept", opts.la.fit.intercept);
  meta.add("cv_folds", opts.la.cv_folds).add("lambda_count", opts.la.lambda_count).add("seed", opts.la.seed);

  Metadata run = meta;
  run.add("n", data.n()).add("p", data.p());
  run.add("n_first", result.split.first_indices.size()).add("n_second", result.split.second_indices.size());
  run.add("prior_p_effective", result.prior.p_effective);
  if (result.screen_penalty) run.add("screen_lambda", result.screen_penalty->lambda);
  run.add("candidate_count", result.candidates.size()).add("candidates", join(candidate_names, ";"));
  run.add("acceptance_rate", est.acceptance_rate).add("models_fitted", est.models_fitted);
  std::size_t selected = 0;
  for (Eigen::Index j = 0; j < est.theta.size(); ++j) selected += est.theta[j] != 0.0;
  run.add("nonzero_coefficients", selected);

  {
    auto out = open_output(opts.out_dir / "coefficients.csv", meta, "fit");
    out << "feature,theta\n";
    if (opts.la.fit.intercept) out << "(intercept)," << format_real(est.intercept) << '\n';
    for (std::size_t j = 0; j < data.p(); ++j)
      out << data.feature_names()[j] << ',' << format_real(est.theta[static_cast<Eigen::Index>(j)]) << '\n';
  }
  {
    auto out = open_output(opts.out_dir / "trace.csv", meta, "fit");
    out << "iteration,pattern_size,accepted,score\n";
    for (const auto& t : est.trace)
      out << t.iteration << ',' << t.pattern_size << ',' << (t.accepted ? 1 : 0) << ',' << format_real(t.score) << '\n';
  }
  {
    auto out = open_output(opts.out_dir / "metadata.csv", meta, "fit");
    out << "key,value\n";
    for (const auto& [k, v] : run.entries()) out << k << ',' << v << '\n';
  }
  return result;
}

// --------------------------------------------------------------- benchmark

struct BenchmarkCmdOptions {
  BenchmarkConfig config{};
  std::filesystem::path out_dir = ".";

  void validate() const {
    if (config.reps < 2) throw validation_error("--reps must be >= 2");
    if (config.scenarios.empty()) throw validation_error("--model needs at least one scenario");
    if (config.methods.empty()) throw validation_error("--methods needs at least one method");
    if (config.threads < 1) throw validation_error("--threads must be >= 1");
    if (config.method_options.la.mh.iterations < 1) throw validation_error("--iters must be >= 1");
    for (const auto& s : config.scenarios) {
      s.validate();
      if (s.model != CovariateModel::independent) banded_cholesky(scenario_precision(s));
    }
  }
};

/// Writes summary.csv (one row per scenario x method) and records.csv (one
/// row per scenario x replication x method).
inline BenchmarkResult run_benchmark_command(const BenchmarkCmdOptions& opts, std::ostream& log = std::cerr) {
  opts.validate();
  ensure_directory(opts.out_dir);
  const auto& cfg = opts.config;
  const BenchmarkResult result = run_benchmark(cfg);

  std::vector<std::string> models, methods;
  for (const auto& s : cfg.scenarios) models.push_back(to_string(s.model));
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  const auto& s0 = cfg.scenarios.front();
  Metadata meta;
  meta.add("model", join(models, ";")).add("n", s0.n).add("p", s0.p).add("block", s0.correlated_block);
  meta.add("rho1", s0.rho1).add("rho2_lag1", s0.rho2_lag1).add("rho2_lag2", s0.rho2_lag2);
  meta.add("methods", join(methods, ";")).add("reps", cfg.reps).add("seed", cfg.base_seed);
  meta.add("test_n", cfg.test_size).add("burnin", cfg.method_options.la.mh.burnin);
  meta.add("iters", cfg.method_options.la.mh.iterations).add("cv_folds", cfg.method_options.cv_folds);
  meta.add("timing", std::string(cfg.timing ? "wall-clock seconds per fit, including cross-validation" : "off"));

  std::size_t failures = 0;
  {
    auto out = open_output(opts.out_dir / "records.csv", meta, "benchmark");
    out << "model,n,p,method,replication,auc,fp,fn,seconds,status\n";
    for (const auto& r : result.records) {
      out << to_string(r.scenario.model) << ',' << r.scenario.n << ',' << r.scenario.p << ',' << to_string(r.method)
          << ',' << r.replication << ',';
      if (r.ok) {
        out << format_real(r.auc) << ',' << r.fp << ',' << r.fn_count << ',' << format_real(r.seconds) << ",ok\n";
      } else {
        ++failures;
        std::string reason = r.error;
        for (char& c : reason)
          if (c == ',' || c == '\n') c = ' ';
        out << ",,,,error: " << reason << '\n';
      }
    }
  }
  {
    auto out = open_output(opts.out_dir / "summary.csv", meta, "benchmark");
    out << "model,n,p,method,auc_mean,auc_se,fp_mean,fp_se,fn_mean,fn_se,time_mean,time_se\n";
    for (const auto& row : result.summary) {
      out << to_string(row.scenario.model) << ',' << row.scenario.n << ',' << row.scenario.p << ','
          << to_string(row.method) << ',' << format_real(row.auc.mean) << ',' << format_real(row.auc.se) << ','
          << format_real(row.fp.mean) << ',' << format_real(row.fp.se) << ',' << format_real(row.fn_count.mean) << ','
          << format_real(row.fn_count.se) << ',' << format_real(row.seconds.mean) << ','
          << format_real(row.seconds.se) << '\n';
    }
  }
  if (failures) log << "warning: " << failures << " method fits failed and were excluded from the summary\n";
  return result;
}

inline std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace logagg::cli
