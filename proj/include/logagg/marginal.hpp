#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/glm.hpp"

namespace logagg {

struct MarginalTestResult {
  std::size_t feature = 0;
  double coefficient = 0.0;
  double std_error = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // zero-variance feature or single-class labels
  bool separated = false;   // slope diverged; Wald statistic from the last iterate
};

// Two-sided tail probability of a standard normal.
inline double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

namespace detail {

inline MarginalTestResult single_feature_wald(const Eigen::Ref<const VectorXd>& x, const VectorXd& y, double b0_start) {
  MarginalTestResult r;
  const Eigen::Index n = x.size();
  double b0 = b0_start, b1 = 0.0;
  double i00 = 0, i01 = 0, i11 = 0;
  auto loglik = [&](double a, double b) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = a + b * x[i];
      total += y[i] * e - log1p_exp(e);
    }
    return total;
  };

  double current = loglik(b0, b1);
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    double g0 = 0, g1 = 0;
    i00 = i01 = i11 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = sigmoid(b0 + b1 * x[i]);
      const double w = mu * (1.0 - mu);
      g0 += y[i] - mu;
      g1 += (y[i] - mu) * x[i];
      i00 += w;
      i01 += w * x[i];
      i11 += w * x[i] * x[i];
    }
    const double det = i00 * i11 - i01 * i01;
    if (!(det > 0.0)) break;
    const double d0 = (i11 * g0 - i01 * g1) / det;
    const double d1 = (i00 * g1 - i01 * g0) / det;
    // Gradient and Newton step both small; under separation only the former is.
    if (std::max(std::abs(g0), std::abs(g1)) < 1e-8 &&
        std::max(std::abs(d0), std::abs(d1)) <= 1e-6 * std::max({1.0, std::abs(b0), std::abs(b1)})) {
      converged = true;
      break;
    }
    double t = 1.0;
    bool moved = false;
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(current));
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      const double cand = loglik(b0 + t * d0, b1 + t * d1);
      if (cand >= current - slack) {
        b0 += t * d0;
        b1 += t * d1;
        current = cand;
        moved = true;
        break;
      }
    }
    if (!moved || std::abs(b1) > 30.0) break;
  }

  // Observed information at the final iterate.
  i00 = i01 = i11 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = sigmoid(b0 + b1 * x[i]);
    const double w = mu * (1.0 - mu);
    i00 += w;
    i01 += w * x[i];
    i11 += w * x[i] * x[i];
  }
  const double det = i00 * i11 - i01 * i01;
  r.coefficient = b1;
  r.separated = !converged;
  if (!(det > 0.0)) {
    r.std_error = std::numeric_limits<double>::infinity();
    r.p_value = 1.0;
    return r;
  }
  r.std_error = std::sqrt(i00 / det);
  r.p_value = two_sided_normal_p(b1 / r.std_error);
  return r;
}

}  // namespace detail

/// One intercept + feature logistic regression per feature, with a two-sided
/// Wald p-value from the observed information.
inline std::vector<MarginalTestResult> single_locus_pvalues(const Dataset& dataset) {
  std::vector<MarginalTestResult> results;
  results.reserve(dataset.p());
  const std::size_t pos = dataset.positives();
  const bool one_class = pos == 0 || pos == dataset.n();
  const double frac = static_cast<double>(pos) / static_cast<double>(dataset.n());
  const double b0 = one_class ? 0.0 : std::log(frac / (1.0 - frac));

  for (std::size_t j = 0; j < dataset.p(); ++j) {
    const auto col = dataset.x().col(static_cast<Eigen::Index>(j));
    const bool constant = (col.array() == col[0]).all();
    MarginalTestResult r;
    if (constant || one_class) {
      r.degenerate = true;
    } else {
      r = detail::single_feature_wald(col, dataset.y(), b0);
    }
    r.feature = j;
    results.push_back(r);
  }
  return results;
}

/// Features with p-value < level / total_tests. total_tests defaults to the
/// number of results.
inline std::vector<std::size_t> bonferroni_select(const std::vector<MarginalTestResult>& results, double level,
                                                  std::size_t total_tests = 0) {
  if (!(level > 0.0 && level < 1.0)) throw validation_error("Bonferroni level must lie in (0, 1)");
  const std::size_t m = total_tests ? total_tests : results.size();
  std::vector<std::size_t> selected;
  if (m == 0) return selected;
  const double threshold = level / static_cast<double>(m);
  for (const auto& r : results)
    if (r.p_value < threshold) selected.push_back(r.feature);
  return selected;
}

/// Features whose unadjusted p-value does not exceed `threshold`. A zero
/// threshold retains nothing.
inline std::vector<std::size_t> pvalue_filter(const std::vector<MarginalTestResult>& results, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw validation_error("p-value threshold must lie in [0, 1]");
  std::vector<std::size_t> kept;
  if (threshold == 0.0) return kept;
  for (const auto& r : results)
    if (r.p_value <= threshold) kept.push_back(r.feature);
  return kept;
}

}  // namespace logagg
