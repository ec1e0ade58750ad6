#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/glm.hpp"

namespace logagg {

/// Elastic-net penalty n * lambda * ((1 - alpha)/2 ||theta||^2 + alpha ||theta||_1).
/// alpha = 1 is the lasso, alpha = 0 is ridge.
struct PenaltySpec {
  double lambda = 0.0;
  double alpha = 1.0;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw validation_error("lambda must be a finite value >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw validation_error("alpha must lie in [0, 1]");
  }
  bool operator==(const PenaltySpec&) const = default;
};

struct PenalizedOptions {
  bool intercept = false;     // unpenalized intercept
  double tolerance = 1e-7;    // stop when a full sweep moves no coordinate by more than this
  int max_sweeps = 10000;
};

struct PenalizedFit {
  VectorXd theta;
  double intercept = 0.0;
  int sweeps = 0;
  bool converged = false;
  double train_loglik = 0.0;

  std::size_t nonzeros() const { return static_cast<std::size_t>((theta.array() != 0.0).count()); }
};

namespace detail {

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// Cyclic coordinate ascent on l(theta)/n - h(theta). Each outer iteration
// forms the quadratic (IRLS) approximation of l/n at the current iterate and
// maximizes approximation-minus-penalty by cyclic soft-thresholding updates;
// the resulting step is then halved until the exact objective does not
// decrease. Sweeps run over the active set; once it converges, a full
// gradient pass adds every zero coordinate that a full sweep would move.
class CoordinateAscent {
 public:
  CoordinateAscent(const Dataset& data, const PenalizedOptions& opts)
      : x_(data.x()), y_(data.y()), opts_(opts), n_(static_cast<double>(data.n())),
        theta_(VectorXd::Zero(data.x().cols())), eta_(VectorXd::Zero(data.x().rows())),
        wres_(data.x().rows()), weight_(data.x().rows()) {}

  void warm_start(const VectorXd& theta, double intercept) {
    theta_ = theta;
    intercept_ = intercept;
    eta_ = x_ * theta_;
    eta_.array() += intercept_;
  }

  PenalizedFit run(const PenaltySpec& penalty) {
    l1_ = penalty.lambda * penalty.alpha;
    l2_ = penalty.lambda * (1.0 - penalty.alpha);
    active_.clear();
    in_active_.assign(static_cast<std::size_t>(x_.cols()), false);
    for (Eigen::Index j = 0; j < theta_.size(); ++j)
      if (theta_[j] != 0.0) activate(j);

    PenalizedFit fit;
    int sweeps = 0;
    bool converged = false;
    while (sweeps < opts_.max_sweeps) {
      const bool settled = converge_active(sweeps);
      ++sweeps;  // the full gradient pass below counts as a sweep
      if (add_violators() == 0) {
        converged = settled;
        break;
      }
    }
    fit.theta = theta_;
    fit.intercept = intercept_;
    fit.sweeps = sweeps;
    fit.converged = converged;
    fit.train_loglik = log_likelihood_eta(eta_, y_);
    return fit;
  }

 private:
  void activate(Eigen::Index j) {
    if (!in_active_[static_cast<std::size_t>(j)]) {
      in_active_[static_cast<std::size_t>(j)] = true;
      active_.push_back(j);
    }
  }

  // Zero coordinates whose exact gradient exceeds the l1 threshold.
  std::size_t add_violators() {
    VectorXd resid(eta_.size());
    for (Eigen::Index i = 0; i < eta_.size(); ++i) resid[i] = y_[i] - sigmoid(eta_[i]);
    std::size_t added = 0;
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      if (in_active_[static_cast<std::size_t>(j)]) continue;
      const double grad = x_.col(j).dot(resid) / n_;
      if (std::abs(grad) > l1_ * (1.0 + 1e-10)) {
        activate(j);
        ++added;
      }
    }
    if (added) std::sort(active_.begin(), active_.end());
    return added;
  }

  double penalized_objective(const VectorXd& eta, const VectorXd& theta) const {
    return log_likelihood_eta(eta, y_) / n_ - l1_ * theta.lpNorm<1>() - 0.5 * l2_ * theta.squaredNorm();
  }

  // Proximal-Newton iterations on the active set until no coordinate moves by
  // the tolerance or the sweep budget runs out.
  bool converge_active(int& sweeps) {
    double objective = penalized_objective(eta_, theta_);
    while (sweeps < opts_.max_sweeps) {
      const VectorXd theta_old = theta_;
      const double intercept_old = intercept_;
      const VectorXd eta_old = eta_;
      sweeps += solve_quadratic(opts_.max_sweeps - sweeps);

      const VectorXd step = theta_ - theta_old;
      const double step_b = intercept_ - intercept_old;
      const VectorXd eta_step = eta_ - eta_old;
      const double slack = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(objective));
      double t = 1.0;
      bool moved = false;
      for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
        const VectorXd theta_c = theta_old + t * step;
        const VectorXd eta_c = eta_old + t * eta_step;
        const double objective_c = penalized_objective(eta_c, theta_c);
        if (objective_c >= objective - slack) {
          theta_ = theta_c;
          intercept_ = intercept_old + t * step_b;
          eta_ = eta_c;
          objective = objective_c;
          moved = true;
          break;
        }
      }
      if (!moved) {
        theta_ = theta_old;
        intercept_ = intercept_old;
        eta_ = eta_old;
        return true;
      }
      if (std::max(t * step.lpNorm<Eigen::Infinity>(), std::abs(t * step_b)) < opts_.tolerance) return true;
    }
    return false;
  }

  // Maximizes the quadratic model -1/(2n) sum_i w_i (z_i - eta_i)^2 - penalty
  // over the active set. wres_ holds w_i (z_i - eta_i); the linear predictor
  // is brought up to date once the sweeps finish.
  int solve_quadratic(int budget) {
    for (Eigen::Index i = 0; i < eta_.size(); ++i) {
      const double mu = sigmoid(eta_[i]);
      weight_[i] = std::max(mu * (1.0 - mu), 1e-5);
      wres_[i] = y_[i] - mu;
    }
    const auto k = static_cast<Eigen::Index>(active_.size());
    weighted_.resize(eta_.size(), k);
    curvature_.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto col = x_.col(active_[static_cast<std::size_t>(c)]);
      weighted_.col(c) = weight_.cwiseProduct(col);
      curvature_[c] = std::max(weighted_.col(c).dot(col) / n_, 1e-12);
    }
    const double weight_sum = weight_.sum();
    const VectorXd theta_start = theta_;
    const double intercept_start = intercept_;

    int sweeps = 0;
    while (sweeps < budget) {
      ++sweeps;
      double max_change = 0.0;
      if (opts_.intercept) {
        const double delta = wres_.sum() / weight_sum;
        if (delta != 0.0) {
          intercept_ += delta;
          wres_ -= delta * weight_;
          max_change = std::abs(delta);
        }
      }
      for (Eigen::Index c = 0; c < k; ++c) {
        const Eigen::Index j = active_[static_cast<std::size_t>(c)];
        const double current = theta_[j];
        const double grad = x_.col(j).dot(wres_) / n_;
        const double updated = soft_threshold(curvature_[c] * current + grad, l1_) / (curvature_[c] + l2_);
        const double delta = updated - current;
        if (delta == 0.0) continue;
        theta_[j] = updated;
        wres_.noalias() -= delta * weighted_.col(c);
        max_change = std::max(max_change, std::abs(delta));
      }
      if (max_change < opts_.tolerance) break;
    }

    for (Eigen::Index c = 0; c < k; ++c) {
      const Eigen::Index j = active_[static_cast<std::size_t>(c)];
      const double delta = theta_[j] - theta_start[j];
      if (delta != 0.0) eta_.noalias() += delta * x_.col(j);
    }
    eta_.array() += intercept_ - intercept_start;
    return sweeps;
  }

  const MatrixXd& x_;
  const VectorXd& y_;
  PenalizedOptions opts_;
  double n_;
  VectorXd theta_;
  double intercept_ = 0.0;
  VectorXd eta_;
  VectorXd wres_;
  VectorXd weight_;
  MatrixXd weighted_;
  VectorXd curvature_;
  std::vector<Eigen::Index> active_;
  std::vector<bool> in_active_;
  double l1_ = 0.0;
  double l2_ = 0.0;
};

// Intercept-only maximum likelihood: logit of the positive fraction.
inline double null_intercept(const Dataset& data) {
  const double frac = static_cast<double>(data.positives()) / static_cast<double>(data.n());
  if (frac <= 0.0 || frac >= 1.0) return 0.0;
  return std::log(frac / (1.0 - frac));
}

}  // namespace detail

/// Maximizes l(theta) - n * h(theta) by cyclic coordinate ascent.
inline PenalizedFit fit_penalized(const Dataset& train, const PenaltySpec& penalty, const PenalizedOptions& opts = {},
                                  const PenalizedFit* warm = nullptr) {
  penalty.validate();
  detail::CoordinateAscent solver(train, opts);
  if (warm) {
    if (static_cast<std::size_t>(warm->theta.size()) != train.p())
      throw validation_error("warm start has the wrong length");
    solver.warm_start(warm->theta, warm->intercept);
  } else if (opts.intercept) {
    solver.warm_start(VectorXd::Zero(static_cast<Eigen::Index>(train.p())), detail::null_intercept(train));
  }
  return solver.run(penalty);
}

/// Smallest lambda at which every penalized coefficient is zero.
inline double lambda_max(const Dataset& train, double alpha, bool intercept = false) {
  const double b0 = intercept ? detail::null_intercept(train) : 0.0;
  const VectorXd grad = log_likelihood_grad(VectorXd::Zero(static_cast<Eigen::Index>(train.p())), train, b0);
  return grad.lpNorm<Eigen::Infinity>() / static_cast<double>(train.n()) / std::max(alpha, 1e-3);
}

/// Log-spaced decreasing grid from lambda_max(alpha_min) down to ratio * lambda_max(1).
inline std::vector<double> default_lambda_grid(const Dataset& train, double alpha_min, std::size_t count = 100,
                                               std::optional<double> ratio = std::nullopt, bool intercept = false) {
  if (count == 0) throw validation_error("lambda grid needs at least one value");
  const double r = ratio.value_or(train.n() < train.p() ? 1e-2 : 1e-4);
  const double top = lambda_max(train, alpha_min, intercept);
  const double bottom = r * lambda_max(train, 1.0, intercept);
  std::vector<double> grid(count);
  if (count == 1 || !(top > 0.0)) {
    std::fill(grid.begin(), grid.end(), top);
    grid.resize(1);
    return grid;
  }
  const double step = std::log(bottom / top) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) grid[k] = top * std::exp(step * static_cast<double>(k));
  return grid;
}

struct PathOptions {
  double max_deviance_ratio = 0.999;  // stop once the fit explains this fraction of null deviance
};

/// Fits a decreasing lambda sequence with warm starts. The path stops early
/// (remaining entries absent) once the fit saturates, as near-separable fits
/// only drift toward infinity from there.
inline std::vector<PenalizedFit> fit_path(const Dataset& train, std::span<const double> lambdas_desc, double alpha,
                                          const PenalizedOptions& opts = {}, const PathOptions& path = {}) {
  std::vector<PenalizedFit> fits;
  const double null_loglik = opts.intercept
                                 ? log_likelihood(VectorXd::Zero(static_cast<Eigen::Index>(train.p())), train,
                                                  detail::null_intercept(train))
                                 : -static_cast<double>(train.n()) * std::log(2.0);
  const PenalizedFit* warm = nullptr;
  for (double lambda : lambdas_desc) {
    fits.push_back(fit_penalized(train, {lambda, alpha}, opts, warm));
    warm = &fits.back();
    const double ratio = null_loglik < 0.0 ? 1.0 - fits.back().train_loglik / null_loglik : 0.0;
    if (ratio > path.max_deviance_ratio || fits.back().nonzeros() >= train.n()) break;
  }
  return fits;
}

struct CvResult {
  PenaltySpec selected;
  std::vector<double> lambdas;  // as given
  std::vector<double> alphas;   // as given
  // scores(a, l): mean over folds of the held-out log-likelihood; NaN where a
  // fold's path stopped before reaching lambdas[l].
  MatrixXd scores;
};

/// Assigns each row to one of `folds` folds by a seeded shuffle.
inline std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t r = 0; r < n; ++r) fold[order[r]] = r % folds;
  return fold;
}

/// K-fold cross-validation over a (lambda, alpha) grid. Picks the maximum mean
/// held-out log-likelihood; ties go to the larger lambda, then larger alpha.
inline CvResult cross_validate(const Dataset& train, std::span<const double> lambda_grid,
                               std::span<const double> alpha_grid, std::size_t folds, std::uint64_t seed,
                               const PenalizedOptions& opts = {}, const PathOptions& path = {}) {
  if (lambda_grid.empty() || alpha_grid.empty()) throw validation_error("cross-validation grids must be nonempty");
  if (folds < 2) throw validation_error("cross-validation needs at least 2 folds");
  if (folds > train.n())
    throw validation_error("fold count " + std::to_string(folds) + " exceeds n=" + std::to_string(train.n()));
  for (double l : lambda_grid) PenaltySpec{l, 1.0}.validate();
  for (double a : alpha_grid) PenaltySpec{0.0, a}.validate();

  CvResult result;
  result.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  result.alphas.assign(alpha_grid.begin(), alpha_grid.end());
  result.scores = MatrixXd::Zero(static_cast<Eigen::Index>(alpha_grid.size()),
                                 static_cast<Eigen::Index>(lambda_grid.size()));

  std::vector<std::size_t> order(lambda_grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lambda_grid[a] > lambda_grid[b]; });
  std::vector<double> lambdas_desc;
  for (std::size_t k : order) lambdas_desc.push_back(lambda_grid[k]);

  const auto fold = fold_assignment(train.n(), folds, seed);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit_rows, held_rows;
    for (std::size_t i = 0; i < train.n(); ++i) (fold[i] == f ? held_rows : fit_rows).push_back(i);
    const Dataset fit_set = restrict(train, fit_rows);
    const Dataset held_set = restrict(train, held_rows);
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
      const auto fits = fit_path(fit_set, lambdas_desc, alpha_grid[a], opts, path);
      for (std::size_t k = 0; k < order.size(); ++k) {
        auto& cell = result.scores(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(order[k]));
        if (k < fits.size())
          cell += log_likelihood(fits[k].theta, held_set, fits[k].intercept);
        else
          cell = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  result.scores /= static_cast<double>(folds);

  bool found = false;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
    for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
      const double s = result.scores(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(l));
      if (std::isnan(s)) continue;
      const bool better = !found || s > best ||
                          (s == best && (lambda_grid[l] > result.selected.lambda ||
                                         (lambda_grid[l] == result.selected.lambda && alpha_grid[a] > result.selected.alpha)));
      if (better) {
        best = s;
        result.selected = {lambda_grid[l], alpha_grid[a]};
        found = true;
      }
    }
  }
  if (!found) throw numeric_error("cross-validation produced no finite score");
  return result;
}

}  // namespace logagg
