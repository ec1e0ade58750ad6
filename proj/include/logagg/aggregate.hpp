#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/glm.hpp"

namespace logagg {

/// Sparsity prior pi_m proportional to (k / (2 e p))^k, k = |m|_1.
/// Only the unnormalized log is ever needed: the normalizer cancels.
struct PriorSpec {
  std::size_t p_effective = 1;
};

inline double log_prior_unnorm(std::size_t k, const PriorSpec& prior) {
  if (prior.p_effective < 1) throw validation_error("prior p_effective must be >= 1");
  if (k == 0) return 0.0;  // 0^0 = 1
  const double kd = static_cast<double>(k);
  return kd * (std::log(kd) - std::log(2.0 * std::exp(1.0) * static_cast<double>(prior.p_effective)));
}

inline double log_prior_unnorm(const SparsityPattern& pattern, const PriorSpec& prior) {
  return log_prior_unnorm(pattern.count(), prior);
}

enum class ScreenSource { l1cv, marginal, all };

/// Pre-screened features defining the hypercube the chain walks on.
struct CandidateSet {
  std::vector<std::size_t> features;  // sorted, unique
  ScreenSource source = ScreenSource::all;

  static CandidateSet make(std::vector<std::size_t> features, ScreenSource source) {
    std::sort(features.begin(), features.end());
    if (std::adjacent_find(features.begin(), features.end()) != features.end())
      throw validation_error("candidate features must be unique");
    return {std::move(features), source};
  }
  std::size_t size() const { return features.size(); }
};

/// Softmax with max subtraction. Output lies on the probability simplex.
inline std::vector<double> compute_weights(std::span<const double> scores) {
  if (scores.empty()) throw validation_error("compute_weights needs at least one score");
  double top = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (!std::isfinite(s)) throw validation_error("compute_weights needs finite scores");
    top = std::max(top, s);
  }
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += (w[i] = std::exp(scores[i] - top));
  for (double& v : w) v /= total;
  return w;
}

/// sum_m lambda_m l_m - sum_m lambda_m log(lambda_m / pi_m), with unnormalized
/// log priors. Maximized over the simplex by compute_weights(l + log_pi).
inline double kl_objective(std::span<const double> weights, std::span<const double> logliks,
                           std::span<const double> log_priors) {
  if (weights.size() != logliks.size() || weights.size() != log_priors.size())
    throw validation_error("kl_objective inputs must have equal lengths");
  double sum = 0.0, value = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    const double w = weights[m];
    if (w < 0.0) throw validation_error("kl_objective weight is negative");
    sum += w;
    if (w == 0.0) continue;
    value += w * logliks[m] - w * (std::log(w) - log_priors[m]);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw validation_error("kl_objective weights do not sum to 1");
  return value;
}

struct ScoredModel {
  FittedModel fit;
  double validation_loglik = 0.0;
  double log_prior = 0.0;
  double score() const { return validation_loglik + log_prior; }
};

/// Memoizing scorer: log of the unnormalized aggregation weight of a pattern,
/// i.e. validation log-likelihood of the estimation-half fit plus log prior.
/// Holds references to both datasets; they must outlive the scorer.
class PatternScorer {
 public:
  PatternScorer(const Dataset& train, const Dataset& validation, PriorSpec prior, FitOptions options = {})
      : train_(train), validation_(validation), prior_(prior), options_(options) {
    if (train.p() != validation.p()) throw validation_error("train and validation feature counts differ");
  }

  const ScoredModel& model(const SparsityPattern& pattern) {
    auto it = cache_.find(pattern);
    if (it != cache_.end()) return it->second;
    ScoredModel scored;
    scored.fit = fit_constrained_mle(train_, pattern, options_);
    scored.validation_loglik = log_likelihood(scored.fit.theta, validation_, scored.fit.intercept);
    scored.log_prior = log_prior_unnorm(pattern, prior_);
    ++models_fitted_;
    return cache_.emplace(pattern, std::move(scored)).first->second;
  }

  double score(const SparsityPattern& pattern) { return model(pattern).score(); }

  std::size_t models_fitted() const { return models_fitted_; }
  const Dataset& train() const { return train_; }
  const Dataset& validation() const { return validation_; }
  const PriorSpec& prior() const { return prior_; }
  const FitOptions& options() const { return options_; }

 private:
  const Dataset& train_;
  const Dataset& validation_;
  PriorSpec prior_;
  FitOptions options_;
  std::unordered_map<SparsityPattern, ScoredModel, SparsityPatternHash> cache_;
  std::size_t models_fitted_ = 0;
};

inline std::size_t default_max_pattern_size(std::size_t candidates, std::size_t n_train, bool intercept) {
  const std::size_t rows_cap = n_train >= 2 + (intercept ? 1 : 0) ? n_train - 1 - (intercept ? 1 : 0) : 0;
  return std::min(candidates, rows_cap);
}

struct ExactAggregate {
  VectorXd theta;
  double intercept = 0.0;
  std::vector<SparsityPattern> patterns;  // enumeration order: subsets by bitmask over the candidates
  std::vector<double> scores;
  std::vector<double> weights;
};

/// Full enumeration of every pattern over the candidates (up to
/// max_pattern_size features; 0 means the default cap) and the exact weighted
/// average of their fits.
inline ExactAggregate exact_aggregate(const CandidateSet& candidates, PatternScorer& scorer,
                                      std::size_t max_pattern_size = 0) {
  constexpr std::size_t kMaxCandidates = 20;
  if (candidates.size() > kMaxCandidates)
    throw validation_error("exact aggregation enumerates 2^" + std::to_string(candidates.size()) +
                           " patterns; at most " + std::to_string(kMaxCandidates) + " candidates allowed");
  const std::size_t p = scorer.train().p();
  for (std::size_t f : candidates.features)
    if (f >= p) throw validation_error("candidate feature index out of range");
  const std::size_t cap = max_pattern_size ? max_pattern_size
                                           : default_max_pattern_size(candidates.size(), scorer.train().n(),
                                                                      scorer.options().intercept);

  ExactAggregate out;
  const std::uint64_t total = 1ULL << candidates.size();
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > cap) continue;
    SparsityPattern pattern(p);
    for (std::size_t c = 0; c < candidates.size(); ++c)
      if (mask >> c & 1ULL) pattern.set(candidates.features[c], true);
    out.scores.push_back(scorer.score(pattern));
    out.patterns.push_back(std::move(pattern));
  }
  out.weights = compute_weights(out.scores);
  out.theta = VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t m = 0; m < out.patterns.size(); ++m) {
    const auto& fit = scorer.model(out.patterns[m]).fit;
    out.theta += out.weights[m] * fit.theta;
    out.intercept += out.weights[m] * fit.intercept;
  }
  return out;
}

inline ExactAggregate exact_aggregate(const CandidateSet& candidates, const Dataset& train, const Dataset& validation,
                                      const PriorSpec& prior, const FitOptions& options = {}) {
  PatternScorer scorer(train, validation, prior, options);
  return exact_aggregate(candidates, scorer);
}

struct MHConfig {
  std::size_t burnin = 100;      // T0
  std::size_t iterations = 2000;  // T
  std::uint64_t seed = 0;
  std::size_t max_pattern_size = 0;  // 0: min(|candidates|, n_train - 1)
};

struct TraceEntry {
  std::size_t iteration = 0;  // 1-based transition count
  std::size_t pattern_size = 0;
  bool accepted = false;
  double score = 0.0;  // score of the state after the transition
};

struct AggregateEstimate {
  VectorXd theta;
  double intercept = 0.0;
  std::vector<TraceEntry> trace;  // length T0 + T
  double acceptance_rate = 0.0;
  // Post-burn-in visits, in order of first visit.
  std::vector<std::pair<SparsityPattern, std::size_t>> visit_counts;
  std::size_t models_fitted = 0;
  std::size_t max_pattern_size = 0;

  std::vector<std::size_t> trace_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(trace.size());
    for (const auto& t : trace) sizes.push_back(t.pattern_size);
    return sizes;
  }
};

/// Log of the Metropolis acceptance probability min{1, exp(to - from)}.
inline double log_acceptance(double score_from, double score_to) { return std::min(0.0, score_to - score_from); }

/// Random-walk Metropolis-Hastings over patterns restricted to the candidate
/// coordinates. Starts at the empty pattern, proposes one uniformly chosen
/// candidate flip per step, and averages the fits of the T states after the
/// burn-in.
inline AggregateEstimate mh_aggregate(const CandidateSet& candidates, PatternScorer& scorer, const MHConfig& config) {
  if (candidates.features.empty()) throw validation_error("MH needs a nonempty candidate set");
  if (config.iterations < 1) throw validation_error("MH iterations must be >= 1");
  const std::size_t p = scorer.train().p();
  for (std::size_t f : candidates.features)
    if (f >= p) throw validation_error("candidate feature index out of range");
  const std::size_t cap_limit =
      default_max_pattern_size(candidates.size(), scorer.train().n(), scorer.options().intercept);
  const std::size_t cap = config.max_pattern_size ? config.max_pattern_size : cap_limit;
  if (cap > cap_limit)
    throw validation_error("max pattern size " + std::to_string(cap) + " exceeds min(|candidates|, n_train - 1) = " +
                           std::to_string(cap_limit));

  const std::size_t models_before = scorer.models_fitted();
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  AggregateEstimate est;
  est.max_pattern_size = cap;
  const std::size_t steps = config.burnin + config.iterations;
  est.trace.reserve(steps);

  SparsityPattern state(p);
  double state_score = scorer.score(state);
  std::size_t accepted = 0;
  std::unordered_map<SparsityPattern, std::size_t, SparsityPatternHash> visit_index;

  for (std::size_t t = 1; t <= steps; ++t) {
    const std::size_t feature = candidates.features[pick(rng)];
    const double r = unif(rng);
    SparsityPattern proposal = state.flipped(feature);
    bool accept = false;
    if (proposal.count() <= cap) {
      const double proposal_score = scorer.score(proposal);
      if (std::log(r) < log_acceptance(state_score, proposal_score)) {
        accept = true;
        state = std::move(proposal);
        state_score = proposal_score;
      }
    }
    accepted += accept;
    est.trace.push_back({t, state.count(), accept, state_score});
    if (t > config.burnin) {
      auto [it, inserted] = visit_index.try_emplace(state, est.visit_counts.size());
      if (inserted) est.visit_counts.emplace_back(state, 0);
      ++est.visit_counts[it->second].second;
    }
  }

  est.theta = VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (const auto& [pattern, count] : est.visit_counts) {
    const auto& fit = scorer.model(pattern).fit;
    est.theta += static_cast<double>(count) * fit.theta;
    est.intercept += static_cast<double>(count) * fit.intercept;
  }
  est.theta /= static_cast<double>(config.iterations);
  est.intercept /= static_cast<double>(config.iterations);
  est.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(steps);
  est.models_fitted = scorer.models_fitted() - models_before;
  return est;
}

inline AggregateEstimate mh_aggregate(const CandidateSet& candidates, const Dataset& train, const Dataset& validation,
                                      const PriorSpec& prior, const MHConfig& config,
                                      const FitOptions& options = {}) {
  PatternScorer scorer(train, validation, prior, options);
  return mh_aggregate(candidates, scorer, config);
}

}  // namespace logagg
