// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "test_util.hpp"

using namespace logagg;
using logagg::testing::random_logistic;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  failures += !pass;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// 1. Log-likelihood gradient vs central finite differences.
void gradient() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Dataset d = random_logistic(20, 5, 1000 + seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd theta(5);
    for (auto& v : theta) v = normal(rng);
    const VectorXd g = log_likelihood_grad(theta, d);
    VectorXd fd(5);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < 5; ++j) {
      VectorXd up = theta, down = theta;
      up[j] += h;
      down[j] -= h;
      fd[j] = (log_likelihood(up, d) - log_likelihood(down, d)) / (2 * h);
    }
    worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, g.lpNorm<Eigen::Infinity>()));
  }
  report(1, worst <= 1e-6, "gradient vs finite differences, max relative error " + fmt(worst) + " (<= 1e-6)");
}

// 2. One-feature constrained MLE vs grid search over [-10, 10].
void mle_oracle() {
  double worst = 0.0;
  int instances = 0;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (instances < 20) {
    MatrixXd x(30, 1);
    VectorXd y(30);
    const double beta = 3.0 * normal(rng) / 2.0;
    for (Eigen::Index i = 0; i < 30; ++i) {
      x(i, 0) = normal(rng);
      y[i] = unif(rng) < sigmoid(beta * x(i, 0)) ? 1.0 : 0.0;
    }
    // Without an intercept the MLE is finite iff the likelihood decays in both directions.
    bool up = false, down = false;
    for (Eigen::Index i = 0; i < 30; ++i) {
      const bool pos = x(i, 0) > 0;
      up |= (y[i] == 1.0) != pos;
      down |= (y[i] == 1.0) == pos;
    }
    if (!up || !down) continue;
    const Dataset d(x, y);
    double best_t = 0.0, best_ll = -std::numeric_limits<double>::infinity();
    VectorXd t(1);
    for (int k = -100000; k <= 100000; ++k) {
      t[0] = k * 1e-4;
      const double ll = log_likelihood(t, d);
      if (ll > best_ll) {
        best_ll = ll;
        best_t = t[0];
      }
    }
    if (std::abs(best_t) >= 10.0) continue;  // optimum outside the oracle's range
    const auto fit = fit_constrained_mle(d, SparsityPattern::from_indices(1, std::vector<std::size_t>{0}));
    worst = std::max(worst, std::abs(fit.theta[0] - best_t));
    ++instances;
  }
  report(2, worst <= 1e-3, "constrained MLE vs grid search on 20 instances, max |diff| " + fmt(worst) + " (<= 1e-3)");
}

std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> w(k);
  for (auto& v : w) v = ex(rng);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= s;
  return w;
}

// 3. Softmax weights maximize the entropy-penalized objective on the simplex.
void weights_kkt() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 3.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ll(5), lp(5), s(5);
    for (std::size_t m = 0; m < 5; ++m) {
      ll[m] = normal(rng) - 60.0;
      lp[m] = log_prior_unnorm(m, {20});
      s[m] = ll[m] + lp[m];
    }
    const double best = kl_objective(compute_weights(s), ll, lp);
    for (int r = 0; r < 1000; ++r) worst = std::max(worst, kl_objective(random_simplex(5, rng), ll, lp) - best);
    for (std::size_t v = 0; v < 5; ++v) {
      std::vector<double> e(5, 0.0);
      e[v] = 1.0;
      worst = std::max(worst, kl_objective(e, ll, lp) - best);
    }
  }
  report(3, worst <= 1e-9,
         "softmax weights vs 1000 random simplex points and vertices on 100 instances, max excess " + fmt(worst) +
             " (<= 1e-9)");
}

// 4. MH visit frequencies and average vs exact enumeration.
void mh_stationarity() {
  const Dataset data = simulate({.n = 200, .p = 8, .seed = 4});
  const auto halves = split(data, 0.5, 5);
  const Dataset train = restrict(data, halves.first_indices), validation = restrict(data, halves.second_indices);
  const auto cands = CandidateSet::make({0, 1, 2, 3, 4, 5, 6, 7}, ScreenSource::all);
  PatternScorer scorer(train, validation, {8});
  const auto exact = exact_aggregate(cands, scorer);
  const std::size_t T = 200000;
  const auto est = mh_aggregate(cands, scorer, {.burnin = 100, .iterations = T, .seed = 6});
  double tv = 0.0;
  for (std::size_t m = 0; m < exact.patterns.size(); ++m) {
    double freq = 0.0;
    for (const auto& [pattern, count] : est.visit_counts)
      if (pattern == exact.patterns[m]) freq = static_cast<double>(count) / static_cast<double>(T);
    tv += 0.5 * std::abs(freq - exact.weights[m]);
  }
  const double gap = (est.theta - exact.theta).lpNorm<Eigen::Infinity>();
  report(4, tv < 0.05 && gap <= 0.02,
         "MH vs exact over 8 candidates, T=200000: TV " + fmt(tv) + " (< 0.05), theta max-norm gap " + fmt(gap) +
             " (<= 0.02)");
}

double kkt_violation(const Dataset& d, const PenalizedFit& fit, const PenaltySpec& pen) {
  const VectorXd g = log_likelihood_grad(fit.theta, d, fit.intercept) / static_cast<double>(d.n());
  double worst = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double smooth = g[j] - pen.lambda * (1.0 - pen.alpha) * fit.theta[j];
    const double l1 = pen.lambda * pen.alpha;
    worst = std::max(worst, fit.theta[j] != 0.0 ? std::abs(smooth - l1 * (fit.theta[j] > 0 ? 1.0 : -1.0))
                                                : std::max(0.0, std::abs(smooth) - l1));
  }
  return worst;
}

// 5. Lasso: small-lambda limit and KKT conditions along the grid.
void lasso() {
  const Dataset small = random_logistic(40, 3, 9, 0.5);
  const auto mle = fit_constrained_mle(small, SparsityPattern::from_indices(3, std::vector<std::size_t>{0, 1, 2}));
  const auto tiny = fit_penalized(small, {1e-8, 1.0});
  const double gap = (tiny.theta - mle.theta).lpNorm<Eigen::Infinity>();
  const Dataset d = random_logistic(100, 30, 10, 0.4);
  double kkt = 0.0;
  for (double lambda : default_lambda_grid(d, 1.0, 10, 0.05))
    kkt = std::max(kkt, kkt_violation(d, fit_penalized(d, {lambda, 1.0}), {lambda, 1.0}));
  report(5, !mle.ridge_fallback && gap <= 1e-4 && kkt <= 1e-5,
         "lasso at lambda=1e-8 vs MLE max |diff| " + fmt(gap) + " (<= 1e-4); max KKT violation on 10 grid points " +
             fmt(kkt) + " (<= 1e-5)");
}

// 6. Scaled simulation benchmark.
void benchmark() {
  BenchmarkConfig cfg;
  for (auto model : {CovariateModel::independent, CovariateModel::ar1, CovariateModel::ar2})
    cfg.scenarios.push_back({.model = model, .n = 300, .p = 1000});
  cfg.methods = {Method::LA, Method::LR, Method::L1LR};
  cfg.reps = 10;
  cfg.base_seed = 2024;
  cfg.threads = std::max(1u, std::thread::hardware_concurrency());
  const auto start = std::chrono::steady_clock::now();
  const auto result = run_benchmark(cfg);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;

  auto row = [&](CovariateModel model, Method m) -> const SummaryRow& {
    for (const auto& r : result.summary)
      if (r.scenario.model == model && r.method == m) return r;
    throw std::logic_error("missing summary row");
  };
  bool pass = minutes <= 30.0;
  std::ostringstream detail;
  detail << "benchmark n=300 p=1000 10 reps (" << fmt(minutes, 3) << " min, <= 30)";
  for (const auto& r : result.summary) pass &= r.failures == 0;
  {
    const auto &la = row(CovariateModel::independent, Method::LA), &l1 = row(CovariateModel::independent, Method::L1LR);
    pass &= la.auc.mean >= 0.90 && la.fp.mean < 0.5 * l1.fp.mean && la.fn_count.mean <= 1.0;
    detail << "; indep LA AUC " << fmt(la.auc.mean) << " (>= 0.90), LA FP " << fmt(la.fp.mean) << " vs L1LR FP "
           << fmt(l1.fp.mean) << " (< half), LA FN " << fmt(la.fn_count.mean) << " (<= 1)";
  }
  for (auto model : {CovariateModel::ar1, CovariateModel::ar2}) {
    const auto &la = row(model, Method::LA), &lr = row(model, Method::LR), &l1 = row(model, Method::L1LR);
    pass &= la.auc.mean > lr.auc.mean && la.fp.mean < l1.fp.mean;
    detail << "; " << to_string(model) << " LA/LR AUC " << fmt(la.auc.mean) << "/" << fmt(lr.auc.mean)
           << ", LA/L1LR FP " << fmt(la.fp.mean) << "/" << fmt(l1.fp.mean);
  }
  report(6, pass, detail.str());
}

// 7. Single-locus p-values on pure noise are uniform.
void calibration() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  MatrixXd x(500, 200);
  VectorXd y(500);
  for (Eigen::Index i = 0; i < 500; ++i) {
    for (Eigen::Index j = 0; j < 200; ++j) x(i, j) = normal(rng);
    y[i] = coin(rng) ? 1.0 : 0.0;
  }
  std::vector<double> ps;
  for (const auto& r : single_locus_pvalues(Dataset(x, y))) ps.push_back(r.p_value);
  const double d = logagg::testing::ks_statistic(ps, [](double u) { return u; });
  const double critical = 1.628 / std::sqrt(200.0);
  report(7, d < critical, "KS statistic of 200 noise p-values at n=500: " + fmt(d) + " (< " + fmt(critical) + ")");
}

int cli(const std::string& args) {
  const std::string cmd = std::string(LOGAGG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 8. CLI fit and benchmark are byte-reproducible.
void determinism() {
  logagg::testing::TempDir dir("acceptance");
  bool pass = cli("simulate --n 300 --p 1000 --seed 8 --out-dir " + (dir / "sim").string()) == 0;
  const std::string fit = "fit --input " + (dir / "sim" / "train.csv").string() + " --seed 3 --out-dir ";
  const std::string bench =
      "benchmark --model indep,ar1 --n 150 --p 200 --reps 2 --test-n 500 --timing off --seed 5 --out-dir ";
  for (const char* run : {"1", "2"}) {
    pass &= cli(fit + (dir / ("fit" + std::string(run))).string()) == 0;
    pass &= cli(bench + (dir / ("bench" + std::string(run))).string()) == 0;
  }
  std::size_t compared = 0;
  for (const auto& [sub, files] : {std::pair{std::string("fit"), std::vector<std::string>{"coefficients.csv", "trace.csv", "metadata.csv"}},
                                   std::pair{std::string("bench"), std::vector<std::string>{"records.csv", "summary.csv"}}})
    for (const auto& f : files) {
      const fs::path a = dir / (sub + "1") / f, b = dir / (sub + "2") / f;
      pass &= fs::exists(a) && logagg::testing::slurp(a) == logagg::testing::slurp(b);
      ++compared;
    }
  report(8, pass, "fit and benchmark --timing off rerun with fixed seeds: " + std::to_string(compared) +
                      " output files compared byte-for-byte");
}

double sd(const std::vector<std::size_t>& v, std::size_t from, std::size_t to) {
  double mean = 0.0;
  for (std::size_t i = from; i < to; ++i) mean += static_cast<double>(v[i]);
  mean /= static_cast<double>(to - from);
  double ss = 0.0;
  for (std::size_t i = from; i < to; ++i) ss += (static_cast<double>(v[i]) - mean) * (static_cast<double>(v[i]) - mean);
  return std::sqrt(ss / static_cast<double>(to - from - 1));
}

// 9. Pattern-size trace settles after burn-in.
void trace_shape() {
  const Dataset data = simulate({.n = 300, .p = 1000, .seed = 12});
  LaConfig cfg;
  cfg.mh.burnin = 100;
  cfg.mh.iterations = 2000;
  cfg.seed = 13;
  const auto sizes = la_fit(data, cfg).estimate.trace_sizes();
  const double early = sd(sizes, 0, 100), late = sd(sizes, sizes.size() - 500, sizes.size());
  report(9, sizes.size() == 2100 && late <= early,
         "pattern-size SD over the last 500 iterations " + fmt(late) + " <= SD over iterations 1-100 " + fmt(early));
}

}  // namespace

int main() {
  const std::pair<int, void (*)()> criteria[] = {{1, gradient},   {2, mle_oracle}, {3, weights_kkt},
                                                 {4, mh_stationarity}, {5, lasso}, {6, benchmark},
                                                 {7, calibration}, {8, determinism}, {9, trace_shape}};
  for (const auto& [id, check] : criteria) {
    try {
      check();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
