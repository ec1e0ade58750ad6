// logagg: simulate, screen, fit and benchmark from the command line.
//
// Exit codes: 0 success, 1 invalid input or flags, 2 numerical/runtime failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "logagg/cli.hpp"

namespace {

using namespace logagg;

void add_csv_flags(CLI::App& cmd, std::string& input, CsvOptions& csv, bool& no_header) {
  cmd.add_option("--input", input, "Input CSV (header row; features plus a 0/1 label)")->required();
  cmd.add_option("--label", csv.label_column, "Label column name, or 0-based index with --no-header")
      ->capture_default_str();
  cmd.add_flag("--no-header", no_header, "Input has no header row; features are named f0..f{p-1}");
}

void add_scenario_flags(CLI::App& cmd, ScenarioSpec& s) {
  cmd.add_option("--n", s.n, "Training rows")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--p", s.p, "Features")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--block", s.correlated_block, "Size of the correlated leading block (ar1/ar2)")
      ->capture_default_str();
  cmd.add_option("--rho1", s.rho1, "ar1 lag-1 precision entry")->capture_default_str();
  cmd.add_option("--rho2-lag1", s.rho2_lag1, "ar2 lag-1 precision entry")->capture_default_str();
  cmd.add_option("--rho2-lag2", s.rho2_lag2, "ar2 lag-2 precision entry")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logistic aggregation for sparse binary classification"};
  app.set_version_flag("--version", std::string("logagg ") + cli::kVersion);
  app.require_subcommand(1);

  // simulate
  cli::SimulateOptions sim;
  std::string sim_model = "indep", sim_out = ".";
  auto* simulate = app.add_subcommand("simulate", "Draw a train/test pair and the true coefficients");
  simulate->add_option("--model", sim_model, "Covariate model: indep, ar1, ar2")->capture_default_str();
  add_scenario_flags(*simulate, sim.scenario);
  simulate->add_option("--seed", sim.scenario.seed, "Master seed")->capture_default_str();
  simulate->add_option("--test-n", sim.test_n, "Test rows")->capture_default_str();
  simulate->add_option("--out-dir", sim_out, "Output directory")->capture_default_str();

  // screen
  cli::ScreenOptions scr;
  std::string scr_input, scr_out = ".";
  bool scr_no_header = false;
  auto* screen = app.add_subcommand("screen", "Single-feature Wald p-values and threshold filter");
  add_csv_flags(*screen, scr_input, scr.csv, scr_no_header);
  screen->add_option("--threshold", scr.threshold, "Retain features with p-value <= threshold")
      ->capture_default_str();
  screen->add_option("--bonferroni", scr.bonferroni_level, "Family-wise level reported in metadata")
      ->capture_default_str();
  screen->add_flag("--write-filtered", scr.write_filtered, "Also write filtered.csv with retained columns only");
  screen->add_option("--out-dir", scr_out, "Output directory")->capture_default_str();

  // fit
  cli::FitCmdOptions fit;
  std::string fit_input, fit_out = ".", fit_screen = "l1cv", fit_prior = "global", fit_mode = "simulation";
  std::optional<std::size_t> fit_burnin, fit_iters;
  bool fit_no_header = false;
  auto* fitcmd = app.add_subcommand("fit", "Fit the aggregated estimator on a CSV dataset");
  add_csv_flags(*fitcmd, fit_input, fit.csv, fit_no_header);
  fitcmd->add_option("--split-ratio", fit.la.split_ratio, "Fraction of rows in the estimation half")
      ->capture_default_str();
  fitcmd->add_flag("--stratified", fit.la.stratified, "Stratify the split by label");
  fitcmd->add_option("--screen", fit_screen, "Candidate screen: l1cv, marginal[:THRESH], none")
      ->capture_default_str();
  fitcmd->add_option("--mode", fit_mode, "Chain-length preset: simulation (100+2000) or real (500+1500)")
      ->capture_default_str()
      ->check(CLI::IsMember({"simulation", "real"}));
  fitcmd->add_option("--burnin", fit_burnin, "Burn-in steps (overrides --mode)");
  fitcmd->add_option("--iters", fit_iters, "Averaged steps after burn-in (overrides --mode)");
  fitcmd->add_option("--seed", fit.la.seed, "Master seed")->capture_default_str();
  fitcmd->add_flag("--intercept", fit.la.fit.intercept, "Fit an unpenalized intercept");
  fitcmd->add_option("--prior-p", fit_prior, "Prior dimension: global (all features) or candidates")
      ->capture_default_str()
      ->check(CLI::IsMember({"global", "candidates"}));
  fitcmd->add_option("--max-size", fit.la.mh.max_pattern_size, "Largest pattern visited (0: n1 - 1 cap)")
      ->capture_default_str();
  fitcmd->add_option("--cv-folds", fit.la.cv_folds, "Folds for l1cv screening")->capture_default_str();
  fitcmd->add_option("--lambda-count", fit.la.lambda_count, "Lambda grid size for l1cv screening")
      ->capture_default_str();
  fitcmd->add_option("--out-dir", fit_out, "Output directory")->capture_default_str();

  // benchmark
  cli::BenchmarkCmdOptions bench;
  bench.config.threads = cli::default_threads();
  ScenarioSpec bench_spec;
  std::vector<std::string> bench_models{"indep"}, bench_methods{"la", "lr", "l1lr", "enet"};
  std::string bench_out = ".", bench_timing = "wall";
  std::size_t bench_burnin = 100, bench_iters = 2000;
  auto* benchmark = app.add_subcommand("benchmark", "Replicated simulation comparison of methods");
  benchmark->add_option("--model", bench_models, "Scenarios: indep, ar1, ar2 (comma-separated)")
      ->delimiter(',')
      ->capture_default_str();
  add_scenario_flags(*benchmark, bench_spec);
  benchmark->add_option("--methods", bench_methods, "Methods: la, lr, l1lr, enet (comma-separated)")
      ->delimiter(',')
      ->capture_default_str();
  benchmark->add_option("--reps", bench.config.reps, "Replications per scenario")->capture_default_str();
  benchmark->add_option("--seed", bench.config.base_seed, "Master seed")->capture_default_str();
  benchmark->add_option("--threads", bench.config.threads, "Worker threads")->capture_default_str();
  benchmark->add_option("--test-n", bench.config.test_size, "Test rows per replication")->capture_default_str();
  benchmark->add_option("--timing", bench_timing, "wall: record fit seconds; off: record 0 (byte-reproducible)")
      ->capture_default_str()
      ->check(CLI::IsMember({"wall", "off"}));
  benchmark->add_option("--burnin", bench_burnin, "LA burn-in steps")->capture_default_str();
  benchmark->add_option("--iters", bench_iters, "LA averaged steps")->capture_default_str();
  benchmark->add_option("--cv-folds", bench.config.method_options.cv_folds, "Folds for L1-LR, Enet and LA screening")
      ->capture_default_str();
  benchmark->add_option("--out-dir", bench_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*simulate) {
      sim.scenario.model = parse_covariate_model(sim_model);
      sim.out_dir = sim_out;
      cli::run_simulate(sim);
    } else if (*screen) {
      scr.input = scr_input;
      scr.csv.has_header = !scr_no_header;
      scr.out_dir = scr_out;
      const auto s = cli::run_screen(scr);
      std::cout << s.retained << " of " << s.features << " features retained; " << s.bonferroni
                << " pass Bonferroni at level " << scr.bonferroni_level << '\n';
    } else if (*fitcmd) {
      fit.input = fit_input;
      fit.csv.has_header = !fit_no_header;
      fit.out_dir = fit_out;
      fit.la.screen = cli::parse_screen(fit_screen);
      fit.la.prior_mode = fit_prior == "global" ? PriorMode::global : PriorMode::candidates;
      const bool real = fit_mode == "real";
      fit.la.mh.burnin = fit_burnin.value_or(real ? 500 : 100);
      fit.la.mh.iterations = fit_iters.value_or(real ? 1500 : 2000);
      const auto r = cli::run_fit(fit);
      std::size_t nonzero = 0;
      for (Eigen::Index j = 0; j < r.estimate.theta.size(); ++j) nonzero += r.estimate.theta[j] != 0.0;
      std::cout << r.candidates.size() << " candidates, " << nonzero << " nonzero coefficients, acceptance rate "
                << r.estimate.acceptance_rate << '\n';
    } else if (*benchmark) {
      for (const auto& m : bench_models) {
        ScenarioSpec s = bench_spec;
        s.model = parse_covariate_model(m);
        bench.config.scenarios.push_back(s);
      }
      for (const auto& m : bench_methods) bench.config.methods.push_back(parse_method(m));
      bench.config.timing = bench_timing == "wall";
      bench.config.method_options.la.mh.burnin = bench_burnin;
      bench.config.method_options.la.mh.iterations = bench_iters;
      bench.config.method_options.la.cv_folds = bench.config.method_options.cv_folds;
      bench.out_dir = bench_out;
      const auto result = cli::run_benchmark_command(bench);
      std::cout << result.summary.size() << " summary rows, " << result.records.size() << " records\n";
    }
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
