// Minimal library walk-through: simulate a sparse problem, fit the aggregated
// estimator, and score it on held-out data.

#include <iostream>

#include "logagg/logagg.hpp"

int main() {
  using namespace logagg;

  ScenarioSpec spec;
  spec.n = 300;
  spec.p = 200;
  spec.seed = 42;
  const Dataset train = simulate(spec);
  const Dataset test = simulate_test(spec, 2000);

  LaConfig config;  // 50/50 split, L1-CV screen, 100 burn-in + 2000 averaged steps
  config.seed = 1;
  const LaResult fit = la_fit(train, config);

  std::cout << "candidates:";
  for (std::size_t j : fit.candidates.features) std::cout << ' ' << train.feature_names()[j];
  std::cout << "\nacceptance rate: " << fit.estimate.acceptance_rate << "\nnonzero coefficients:\n";
  for (Eigen::Index j = 0; j < fit.estimate.theta.size(); ++j)
    if (fit.estimate.theta[j] != 0.0)
      std::cout << "  " << train.feature_names()[static_cast<std::size_t>(j)] << " = " << fit.estimate.theta[j] << '\n';

  const VectorXd eta = linear_predictor(fit.estimate.theta, test, fit.estimate.intercept);
  std::cout << "test AUC: "
            << auc({eta.data(), static_cast<std::size_t>(eta.size())}, {test.y().data(), test.n()}) << '\n';
}
