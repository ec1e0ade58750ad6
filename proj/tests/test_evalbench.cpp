#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace logagg;

namespace {

double auc_of(const std::vector<double>& s, const std::vector<double>& l) { return auc(s, l); }

// O(N^2) pair counting.
double auc_pairs(const std::vector<double>& s, const std::vector<double>& l) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1.0 && l[j] == 0.0) {
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        den += 1.0;
      }
  return num / den;
}

}  // namespace

TEST(Auc, KnownCases) {
  EXPECT_EQ(auc_of({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc_of({0.9, 0.8, 0.3}, {1, 0, 1}), 0.5);
  EXPECT_EQ(auc_of({2, 2, 2, 2, 2}, {1, 0, 1, 0, 0}), 0.5);
  EXPECT_THROW(auc_of({1, 2}, {1, 1}), validation_error);
  EXPECT_THROW(auc_of({1, 2}, {1, 2}), validation_error);
  EXPECT_THROW(auc_of({1, 2, 3}, {1, 0}), validation_error);
}

TEST(Auc, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 60)(rng);
    std::vector<double> s(n), l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, 6)(rng);  // many ties
      l[i] = std::bernoulli_distribution(0.4)(rng) ? 1.0 : 0.0;
    }
    l[0] = 1.0;
    l[1] = 0.0;
    EXPECT_NEAR(auc_of(s, l), auc_pairs(s, l), 1e-14);
  }
}

TEST(Auc, MonotoneInvarianceAndComplement) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(80), l(80), t(80), neg(80);
    for (std::size_t i = 0; i < 80; ++i) {
      s[i] = normal(rng);
      l[i] = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
      t[i] = std::exp(3.0 * s[i]) + s[i] * s[i] * s[i];
      neg[i] = -s[i];
    }
    l[0] = 1.0;
    l[1] = 0.0;
    EXPECT_EQ(auc_of(s, l), auc_of(t, l));
    EXPECT_NEAR(auc_of(neg, l), 1.0 - auc_of(s, l), 1e-14);
  }
}

TEST(FpFn, Definitions) {
  const auto truth = true_theta(10);
  EXPECT_EQ(fp_fn(truth.theta, truth, 300).fp, 0u);
  EXPECT_EQ(fp_fn(truth.theta, truth, 300).fn_count, 0u);
  VectorXd est = truth.theta;
  est[5] = 0.01;  // above 1/300
  EXPECT_EQ(fp_fn(est, truth, 300).fp, 1u);
  est[5] = 0.003;  // below 1/300
  EXPECT_EQ(fp_fn(est, truth, 300).fp, 0u);
  const auto zero = fp_fn(VectorXd::Zero(10), truth, 300);
  EXPECT_EQ(zero.fp, 0u);
  EXPECT_EQ(zero.fn_count, 5u);
  EXPECT_THROW(fp_fn(VectorXd::Zero(9), truth, 300), validation_error);
}

TEST(FpFn, SumIsSymmetricDifference) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 0.02);
  const auto truth = true_theta(40);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd est(40);
    for (auto& v : est) v = std::bernoulli_distribution(0.3)(rng) ? normal(rng) : 0.0;
    const auto e = fp_fn(est, truth, 100);
    std::size_t symdiff = 0;
    for (Eigen::Index j = 0; j < 40; ++j) symdiff += (std::abs(est[j]) > 0.01) != (j < 5);
    EXPECT_EQ(e.fp + e.fn_count, symdiff);
    EXPECT_LE(e.fp, 35u);
    EXPECT_LE(e.fn_count, 5u);
  }
}

TEST(MeanSe, HandComputed) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto m = mean_se(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_TRUE(std::isnan(mean_se(std::vector<double>{}).mean));
  EXPECT_TRUE(std::isnan(mean_se(std::vector<double>{1.0}).se));
}

namespace {

// Deterministic stub: LA returns the truth plus one spurious coefficient on
// odd seeds; LR returns all zeros.
MethodFit stub(Method m, const Dataset& train, std::uint64_t seed) {
  MethodFit f;
  f.theta = VectorXd::Zero(static_cast<Eigen::Index>(train.p()));
  if (m == Method::LA) {
    f.theta = true_theta(train.p()).theta;
    if (seed % 2) f.theta[7] = 1.0;
  }
  return f;
}

BenchmarkConfig small_config() {
  BenchmarkConfig cfg;
  cfg.scenarios = {ScenarioSpec{.n = 40, .p = 12}};
  cfg.methods = {Method::LA, Method::LR};
  cfg.reps = 2;
  cfg.base_seed = 5;
  cfg.test_size = 300;
  cfg.timing = false;
  return cfg;
}

}  // namespace

TEST(Benchmark, StubArithmetic) {
  const auto result = run_benchmark(small_config(), stub);
  ASSERT_EQ(result.records.size(), 4u);
  ASSERT_EQ(result.summary.size(), 2u);
  for (std::size_t m = 0; m < 2; ++m) {
    const auto& row = result.summary[m];
    EXPECT_EQ(row.replications, 2u);
    std::vector<double> aucs, fps, fns;
    for (const auto& r : result.records)
      if (r.method == row.method) {
        EXPECT_TRUE(r.ok);
        EXPECT_EQ(r.seconds, 0.0);
        aucs.push_back(r.auc);
        fps.push_back(static_cast<double>(r.fp));
        fns.push_back(static_cast<double>(r.fn_count));
      }
    ASSERT_EQ(aucs.size(), 2u);
    EXPECT_DOUBLE_EQ(row.auc.mean, (aucs[0] + aucs[1]) / 2);
    EXPECT_NEAR(row.auc.se, std::abs(aucs[0] - aucs[1]) / 2.0, 1e-15);  // sd/sqrt(2) for two values
    EXPECT_DOUBLE_EQ(row.fp.mean, (fps[0] + fps[1]) / 2);
    EXPECT_NEAR(row.fp.se, std::abs(fps[0] - fps[1]) / 2.0, 1e-15);
    EXPECT_DOUBLE_EQ(row.fn_count.mean, (fns[0] + fns[1]) / 2);
  }
  const auto& lr = result.summary[1];
  EXPECT_EQ(lr.method, Method::LR);
  EXPECT_EQ(lr.auc.mean, 0.5);
  EXPECT_EQ(lr.fn_count.mean, 5.0);
  EXPECT_EQ(lr.fn_count.se, 0.0);
  for (const auto& r : result.records)
    if (r.method == Method::LA) {
      EXPECT_LE(r.fp, 1u);
      EXPECT_EQ(r.fn_count, 0u);
    }
}

TEST(Benchmark, FailuresAreCountedAndExcluded) {
  auto failing = [](Method m, const Dataset& train, std::uint64_t seed) {
    if (m == Method::LR) throw numeric_error("stub failure");
    return stub(m, train, seed);
  };
  const auto result = run_benchmark(small_config(), failing);
  EXPECT_EQ(result.summary[1].failures, 2u);
  EXPECT_EQ(result.summary[1].replications, 0u);
  EXPECT_TRUE(std::isnan(result.summary[1].auc.mean));
  EXPECT_EQ(result.summary[0].failures, 0u);
  for (const auto& r : result.records)
    if (r.method == Method::LR) {
      EXPECT_FALSE(r.ok);
      EXPECT_EQ(r.error, "stub failure");
    }
}

TEST(Benchmark, DeterministicAcrossThreadCounts) {
  auto cfg = small_config();
  cfg.scenarios.push_back(ScenarioSpec{.model = CovariateModel::ar1, .n = 40, .p = 12, .correlated_block = 10});
  cfg.reps = 3;
  cfg.methods = {Method::LR, Method::L1LR};
  cfg.method_options.cv_folds = 3;
  cfg.method_options.lambda_count = 10;
  cfg.threads = 1;
  const auto a = run_benchmark(cfg);
  cfg.threads = 4;
  const auto b = run_benchmark(cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].auc, b.records[i].auc);
    EXPECT_EQ(a.records[i].fp, b.records[i].fp);
    EXPECT_EQ(a.records[i].ok, b.records[i].ok);
  }
}

TEST(Benchmark, RejectsTooFewReps) {
  auto cfg = small_config();
  cfg.reps = 1;
  EXPECT_THROW(run_benchmark(cfg, stub), validation_error);
}

TEST(Methods, AllBaselinesRunOnSmallProblem) {
  const ScenarioSpec spec{.n = 120, .p = 40, .seed = 3};
  const Dataset train = simulate(spec);
  MethodOptions opts;
  opts.cv_folds = 5;
  opts.lambda_count = 30;
  opts.la.cv_folds = 5;
  opts.la.lambda_count = 30;
  for (Method m : {Method::LA, Method::LR, Method::L1LR, Method::ENET}) {
    const auto fit = fit_method(m, train, opts, 1);
    EXPECT_EQ(fit.theta.size(), 40) << to_string(m);
    EXPECT_TRUE(fit.theta.allFinite()) << to_string(m);
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("svm"), validation_error);
}

TEST(Methods, LrRefitsBonferroniSelection) {
  const ScenarioSpec spec{.n = 300, .p = 50, .seed = 4};
  const Dataset train = simulate(spec);
  const auto selected = bonferroni_select(single_locus_pvalues(train), 0.05);
  const auto fit = fit_method(Method::LR, train, {}, 0);
  for (Eigen::Index j = 0; j < 50; ++j) {
    const bool in = std::find(selected.begin(), selected.end(), static_cast<std::size_t>(j)) != selected.end();
    if (!in) {
      EXPECT_EQ(fit.theta[j], 0.0);
    }
  }
  const auto joint = fit_constrained_mle(train, SparsityPattern::from_indices(50, selected));
  EXPECT_EQ(fit.theta, joint.theta);
}
