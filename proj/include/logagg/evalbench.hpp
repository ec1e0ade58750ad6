#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/glm.hpp"
#include "logagg/marginal.hpp"
#include "logagg/penalized.hpp"
#include "logagg/pipeline.hpp"
#include "logagg/seed.hpp"
#include "logagg/simgen.hpp"

namespace logagg {

/// Area under the ROC curve in Mann-Whitney form: (concordant + ties / 2) /
/// (positives * negatives), via average ranks in O(N log N).
inline double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw validation_error("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (double l : labels) {
    if (l != 0.0 && l != 1.0) throw validation_error("auc: labels must be 0 or 1");
    pos += l == 1.0;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw validation_error("auc needs at least one positive and one negative label");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;  // 1-based average ranks of the positives
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k)
      if (labels[order[k]] == 1.0) rank_sum += avg_rank;
    start = end;
  }
  const double pd = static_cast<double>(pos), nd = static_cast<double>(neg);
  return (rank_sum - pd * (pd + 1.0) / 2.0) / (pd * nd);
}

struct SelectionErrors {
  std::size_t fp = 0;
  std::size_t fn_count = 0;
};

/// Feature j counts as selected when |theta_hat_j| > 1/n.
inline SelectionErrors fp_fn(const VectorXd& theta_hat, const TrueCoefficients& truth, std::size_t n) {
  if (theta_hat.size() != truth.theta.size()) throw validation_error("fp_fn: length mismatch");
  if (n < 1) throw validation_error("fp_fn: n must be >= 1");
  const double cut = 1.0 / static_cast<double>(n);
  SelectionErrors e;
  for (Eigen::Index j = 0; j < theta_hat.size(); ++j) {
    const bool selected = std::abs(theta_hat[j]) > cut;
    const bool relevant = truth.theta[j] != 0.0;
    e.fp += selected && !relevant;
    e.fn_count += !selected && relevant;
  }
  return e;
}

enum class Method { LA, LR, L1LR, ENET };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::LA: return "LA";
    case Method::LR: return "LR";
    case Method::L1LR: return "L1LR";
    case Method::ENET: return "ENET";
  }
  return "?";
}

inline Method parse_method(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "la") return Method::LA;
  if (s == "lr") return Method::LR;
  if (s == "l1lr" || s == "l1") return Method::L1LR;
  if (s == "enet") return Method::ENET;
  throw validation_error("unknown method '" + s + "' (expected la, lr, l1lr or enet)");
}

struct MethodOptions {
  LaConfig la{};                                   // la.seed is overwritten per replication
  double bonferroni_level = 0.05;
  std::size_t cv_folds = 10;
  std::size_t lambda_count = 100;
  std::vector<double> enet_alphas{0.2, 0.5, 0.8, 1.0};
};

struct MethodFit {
  VectorXd theta;
  double intercept = 0.0;
};

/// Fits one benchmark method on `train`. Simulation mode: no intercept.
inline MethodFit fit_method(Method method, const Dataset& train, const MethodOptions& options, std::uint64_t seed) {
  MethodFit out;
  out.theta = VectorXd::Zero(static_cast<Eigen::Index>(train.p()));
  switch (method) {
    case Method::LA: {
      LaConfig cfg = options.la;
      cfg.seed = seed;
      const auto result = la_fit(train, cfg);
      out.theta = result.estimate.theta;
      out.intercept = result.estimate.intercept;
      break;
    }
    case Method::LR: {
      // Bonferroni-selected features, refit jointly; zeros elsewhere.
      auto selected = bonferroni_select(single_locus_pvalues(train), options.bonferroni_level);
      const std::size_t cap = train.n() - 1 - (options.la.fit.intercept ? 1 : 0);
      if (selected.size() > cap) selected.resize(cap);
      const auto fit = fit_constrained_mle(train, SparsityPattern::from_indices(train.p(), selected), options.la.fit);
      out.theta = fit.theta;
      out.intercept = fit.intercept;
      break;
    }
    case Method::L1LR:
    case Method::ENET: {
      PenalizedOptions popts;
      popts.intercept = options.la.fit.intercept;
      const std::vector<double> lasso{1.0};
      const auto& alphas = method == Method::L1LR ? lasso : options.enet_alphas;
      const double alpha_min = *std::min_element(alphas.begin(), alphas.end());
      const auto grid = default_lambda_grid(train, alpha_min, options.lambda_count, std::nullopt, popts.intercept);
      const auto cv = cross_validate(train, grid, alphas, options.cv_folds,
                                     derive_seed(seed, {stage::cross_validation}), popts);
      const auto fit = fit_penalized(train, cv.selected, popts);
      out.theta = fit.theta;
      out.intercept = fit.intercept;
      break;
    }
  }
  return out;
}

struct BenchmarkRecord {
  Method method = Method::LA;
  ScenarioSpec scenario;
  std::size_t replication = 0;
  bool ok = true;
  std::string error;
  double auc = 0.0;
  std::size_t fp = 0;
  std::size_t fn_count = 0;
  double seconds = 0.0;
};

struct Moments {
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(count)
};

inline Moments mean_se(std::span<const double> values) {
  Moments m;
  if (values.empty()) return {std::nan(""), std::nan("")};
  const double count = static_cast<double>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= count;
  if (values.size() < 2) {
    m.se = std::nan("");
    return m;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.se = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
  return m;
}

struct SummaryRow {
  Method method = Method::LA;
  ScenarioSpec scenario;
  std::size_t replications = 0;  // successful ones
  std::size_t failures = 0;
  Moments auc, fp, fn_count, seconds;
};

struct BenchmarkConfig {
  std::vector<ScenarioSpec> scenarios;  // scenario seeds are ignored; replications derive theirs
  std::vector<Method> methods;
  std::size_t reps = 10;
  std::uint64_t base_seed = 0;
  std::size_t test_size = 3000;
  std::size_t threads = 1;
  bool timing = true;  // false: record 0 seconds so outputs are byte-reproducible
  MethodOptions method_options{};
};

struct BenchmarkResult {
  std::vector<BenchmarkRecord> records;  // scenario-major, then replication, then method
  std::vector<SummaryRow> summary;       // scenario-major, then method
};

inline std::uint64_t replication_seed(std::uint64_t base, std::size_t scenario, std::size_t rep) {
  return derive_seed(base, {stage::replication, scenario, rep});
}

/// Fits one method on a training draw; the default dispatches to fit_method.
using MethodFitter = std::function<MethodFit(Method, const Dataset&, std::uint64_t)>;

/// Runs every scenario x replication cell: simulate train and an independent
/// test set, fit each method, score AUC on the test set and FP/FN against the
/// truth. Cells may run on several threads; results do not depend on order.
inline BenchmarkResult run_benchmark(const BenchmarkConfig& config, MethodFitter fitter = {}) {
  if (!fitter)
    fitter = [&config](Method m, const Dataset& train, std::uint64_t seed) {
      return fit_method(m, train, config.method_options, seed);
    };
  if (config.reps < 2) throw validation_error("benchmark needs reps >= 2 for standard errors");
  if (config.scenarios.empty() || config.methods.empty())
    throw validation_error("benchmark needs at least one scenario and one method");
  if (config.test_size < 2) throw validation_error("benchmark test size must be >= 2");
  for (const auto& s : config.scenarios) s.validate();

  const std::size_t n_methods = config.methods.size();
  const std::size_t cells = config.scenarios.size() * config.reps;
  BenchmarkResult result;
  result.records.resize(cells * n_methods);

  auto run_cell = [&](std::size_t cell) {
    const std::size_t s = cell / config.reps, rep = cell % config.reps;
    ScenarioSpec spec = config.scenarios[s];
    spec.seed = replication_seed(config.base_seed, s, rep);
    const Dataset train = simulate(spec);
    const Dataset test = simulate_test(spec, config.test_size);
    const auto truth = true_theta(spec.p);
    for (std::size_t m = 0; m < n_methods; ++m) {
      BenchmarkRecord& rec = result.records[cell * n_methods + m];
      rec.method = config.methods[m];
      rec.scenario = spec;
      rec.replication = rep;
      try {
        const auto start = std::chrono::steady_clock::now();
        const auto fit = fitter(rec.method, train, derive_seed(spec.seed, {100 + static_cast<std::uint64_t>(rec.method)}));
        const auto stop = std::chrono::steady_clock::now();
        rec.seconds = config.timing ? std::chrono::duration<double>(stop - start).count() : 0.0;
        const VectorXd eta = linear_predictor(fit.theta, test, fit.intercept);
        rec.auc = auc(std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())),
                      std::span<const double>(test.y().data(), test.n()));
        const auto errs = fp_fn(fit.theta, truth, spec.n);
        rec.fp = errs.fp;
        rec.fn_count = errs.fn_count;
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, cells));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < cells;) {
          try {
            run_cell(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      SummaryRow row;
      row.method = config.methods[m];
      row.scenario = config.scenarios[s];
      std::vector<double> a, fp, fn, sec;
      for (std::size_t rep = 0; rep < config.reps; ++rep) {
        const auto& rec = result.records[(s * config.reps + rep) * n_methods + m];
        if (!rec.ok) {
          ++row.failures;
          continue;
        }
        a.push_back(rec.auc);
        fp.push_back(static_cast<double>(rec.fp));
        fn.push_back(static_cast<double>(rec.fn_count));
        sec.push_back(rec.seconds);
      }
      row.replications = a.size();
      row.auc = mean_se(a);
      row.fp = mean_se(fp);
      row.fn_count = mean_se(fn);
      row.seconds = mean_se(sec);
      result.summary.push_back(row);
    }
  }
  return result;
}

}  // namespace logagg
