#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "logagg/aggregate.hpp"
#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/marginal.hpp"
#include "logagg/penalized.hpp"
#include "logagg/seed.hpp"

namespace logagg {

enum class ScreenKind { l1cv, marginal, none };

struct ScreenSpec {
  ScreenKind kind = ScreenKind::l1cv;
  double threshold = 0.01;  // marginal p-value cutoff
};

enum class PriorMode { global, candidates };

struct LaConfig {
  double split_ratio = 0.5;
  bool stratified = false;
  ScreenSpec screen{};
  PriorMode prior_mode = PriorMode::global;
  MHConfig mh{};  // mh.seed is ignored; the chain seed derives from `seed`
  FitOptions fit{};
  std::size_t cv_folds = 10;
  std::size_t lambda_count = 100;
  std::uint64_t seed = 0;
};

struct LaResult {
  AggregateEstimate estimate;
  CandidateSet candidates;
  SplitSpec split;
  PriorSpec prior;
  std::optional<PenaltySpec> screen_penalty;  // set for l1cv screening
};

/// Nonzero support of an L1 fit on `train`, with lambda chosen by
/// cross-validated held-out log-likelihood.
inline std::vector<std::size_t> screen_l1cv(const Dataset& train, std::size_t folds, std::size_t lambda_count,
                                            std::uint64_t seed, bool intercept, PenaltySpec* chosen = nullptr) {
  PenalizedOptions opts;
  opts.intercept = intercept;
  const auto grid = default_lambda_grid(train, 1.0, lambda_count, std::nullopt, intercept);
  const double alpha = 1.0;
  const auto cv = cross_validate(train, grid, std::span<const double>(&alpha, 1), folds, seed, opts);
  const auto fit = fit_penalized(train, cv.selected, opts);
  if (chosen) *chosen = cv.selected;
  std::vector<std::size_t> support;
  for (Eigen::Index j = 0; j < fit.theta.size(); ++j)
    if (fit.theta[j] != 0.0) support.push_back(static_cast<std::size_t>(j));
  return support;
}

/// Split, screen on the first half, then run the chain with the first half as
/// the estimation sample and the second half as the aggregation sample.
inline LaResult la_fit(const Dataset& dataset, const LaConfig& config) {
  if (config.screen.kind == ScreenKind::none && dataset.p() > 20)
    throw validation_error("screen=none walks all " + std::to_string(dataset.p()) +
                           " features; it is limited to p <= 20 (use l1cv or marginal screening)");

  LaResult result;
  result.split = split(dataset, config.split_ratio, derive_seed(config.seed, {stage::split}), config.stratified);
  const Dataset first = restrict(dataset, result.split.first_indices);
  const Dataset second = restrict(dataset, result.split.second_indices);

  std::vector<std::size_t> features;
  ScreenSource source = ScreenSource::all;
  switch (config.screen.kind) {
    case ScreenKind::l1cv: {
      PenaltySpec chosen;
      features = screen_l1cv(first, config.cv_folds, config.lambda_count,
                             derive_seed(config.seed, {stage::cross_validation}), config.fit.intercept, &chosen);
      result.screen_penalty = chosen;
      source = ScreenSource::l1cv;
      break;
    }
    case ScreenKind::marginal:
      features = pvalue_filter(single_locus_pvalues(first), config.screen.threshold);
      source = ScreenSource::marginal;
      break;
    case ScreenKind::none:
      features.resize(dataset.p());
      for (std::size_t j = 0; j < dataset.p(); ++j) features[j] = j;
      break;
  }
  if (features.empty())
    throw validation_error("screening left no candidate features; relax the screen (e.g. a larger marginal "
                           "threshold or --screen none on small p)");
  result.candidates = CandidateSet::make(std::move(features), source);

  result.prior.p_effective = config.prior_mode == PriorMode::global ? dataset.p() : result.candidates.size();
  PatternScorer scorer(first, second, result.prior, config.fit);
  MHConfig mh = config.mh;
  mh.seed = derive_seed(config.seed, {stage::mcmc});
  result.estimate = mh_aggregate(result.candidates, scorer, mh);
  return result;
}

}  // namespace logagg
