#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"

namespace logagg {

// 1 / (1 + exp(-z)), evaluated on the side that cannot overflow.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Log-likelihood from linear predictors: sum_i y_i eta_i - log(1 + exp(eta_i)).
inline double log_likelihood_eta(const VectorXd& eta, const VectorXd& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) total += y[i] * eta[i] - log1p_exp(eta[i]);
  return total;
}

inline VectorXd linear_predictor(const VectorXd& theta, const Dataset& data, double intercept = 0.0) {
  if (static_cast<std::size_t>(theta.size()) != data.p())
    throw validation_error("coefficient length " + std::to_string(theta.size()) + " does not match p=" +
                           std::to_string(data.p()));
  VectorXd eta = data.x() * theta;
  eta.array() += intercept;
  return eta;
}

inline double log_likelihood(const VectorXd& theta, const Dataset& data, double intercept = 0.0) {
  return log_likelihood_eta(linear_predictor(theta, data, intercept), data.y());
}

/// Gradient of the log-likelihood in theta: X^T (y - sigmoid(X theta + b)).
inline VectorXd log_likelihood_grad(const VectorXd& theta, const Dataset& data, double intercept = 0.0) {
  const VectorXd eta = linear_predictor(theta, data, intercept);
  VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) resid[i] = data.y()[i] - sigmoid(eta[i]);
  return data.x().transpose() * resid;
}

struct FitOptions {
  bool intercept = false;             // unpenalized intercept; the empty pattern is then intercept-only
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;   // max-norm of the restricted gradient
  double ridge = 1e-4;                // fallback penalty eps * sum theta_j^2
  double max_abs_coefficient = 30.0;  // larger coefficients trigger the ridge fallback
  bool record_path = false;           // keep the train log-likelihood after every iterate
};

struct FittedModel {
  SparsityPattern pattern;
  VectorXd theta;  // length p, exactly zero outside the pattern
  double intercept = 0.0;
  double train_loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  bool ridge_fallback = false;
  std::vector<double> loglik_path;
};

namespace detail {

struct NewtonResult {
  VectorXd beta;
  double loglik = 0.0;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  std::vector<double> path;
};

// Damped Newton ascent on l(beta) - ridge * ||beta[0:penalized)||^2 over the
// columns of z. Columns at index >= penalized are not penalized (intercept).
inline NewtonResult newton_logistic(const MatrixXd& z, const VectorXd& y, double ridge, Eigen::Index penalized,
                                    const FitOptions& opts) {
  const Eigen::Index k = z.cols();
  NewtonResult result;
  result.beta = VectorXd::Zero(k);

  auto penalty = [&](const VectorXd& b) { return ridge * b.head(penalized).squaredNorm(); };
  VectorXd eta = VectorXd::Zero(z.rows());
  double loglik = log_likelihood_eta(eta, y);
  double objective = loglik;
  if (opts.record_path) result.path.push_back(loglik);

  VectorXd mu(z.rows()), w(z.rows());
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu[i] = sigmoid(eta[i]);
      w[i] = mu[i] * (1.0 - mu[i]);
    }
    VectorXd grad = z.transpose() * (y - mu);
    grad.head(penalized) -= 2.0 * ridge * result.beta.head(penalized);
    const bool flat = grad.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance;

    MatrixXd hessian = z.transpose() * w.asDiagonal() * z;
    hessian.diagonal().head(penalized).array() += 2.0 * ridge;
    Eigen::LLT<MatrixXd> llt(hessian);
    double jitter = 1e-12 * std::max(1.0, hessian.diagonal().maxCoeff());
    while (llt.info() != Eigen::Success) {
      MatrixXd shifted = hessian;
      shifted.diagonal().array() += jitter;
      llt.compute(shifted);
      jitter *= 10.0;
      if (jitter > 1e6) throw numeric_error("Newton Hessian could not be regularized");
    }
    const VectorXd step = llt.solve(grad);
    // A small gradient alone is not enough: under separation the likelihood
    // flattens while Newton keeps stepping outward by about one unit.
    if (flat && step.lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, result.beta.lpNorm<Eigen::Infinity>())) {
      result.converged = true;
      break;
    }

    // Step halving. Ties within rounding of the objective count as ascent so
    // the iteration can finish its last quadratic-convergence steps.
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(objective));
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const VectorXd candidate = result.beta + t * step;
      const VectorXd eta_c = z * candidate;
      const double loglik_c = log_likelihood_eta(eta_c, y);
      const double objective_c = loglik_c - penalty(candidate);
      if (std::isfinite(objective_c) && objective_c >= objective - slack) {
        result.beta = candidate;
        eta = eta_c;
        loglik = loglik_c;
        objective = objective_c;
        moved = true;
        break;
      }
    }
    result.iterations = iter + 1;
    if (opts.record_path) result.path.push_back(loglik);
    if (!moved) break;
    if (result.beta.lpNorm<Eigen::Infinity>() > opts.max_abs_coefficient) {
      result.diverged = true;
      break;
    }
  }
  result.loglik = loglik;
  return result;
}

}  // namespace detail

/// Maximum-likelihood logistic fit with every coefficient outside `pattern`
/// held at zero. Falls back to a small ridge penalty when Newton does not
/// converge or the coefficients run away (separation).
inline FittedModel fit_constrained_mle(const Dataset& train, const SparsityPattern& pattern,
                                       const FitOptions& opts = {}) {
  if (pattern.size() != train.p())
    throw validation_error("pattern length " + std::to_string(pattern.size()) + " does not match p=" +
                           std::to_string(train.p()));
  const std::size_t free_params = pattern.count() + (opts.intercept ? 1 : 0);
  if (free_params + 1 > train.n())
    throw validation_error("pattern with " + std::to_string(pattern.count()) +
                           " active features exceeds the cap for n=" + std::to_string(train.n()));

  FittedModel model;
  model.pattern = pattern;
  model.theta = VectorXd::Zero(static_cast<Eigen::Index>(train.p()));

  if (free_params == 0) {
    model.train_loglik = -static_cast<double>(train.n()) * std::log(2.0);
    model.converged = true;
    if (opts.record_path) model.loglik_path.push_back(model.train_loglik);
    return model;
  }

  const auto active = pattern.indices();
  const auto k = static_cast<Eigen::Index>(active.size());
  MatrixXd z(train.x().rows(), static_cast<Eigen::Index>(free_params));
  for (Eigen::Index c = 0; c < k; ++c) z.col(c) = train.x().col(static_cast<Eigen::Index>(active[static_cast<std::size_t>(c)]));
  if (opts.intercept) z.col(k).setOnes();

  auto result = detail::newton_logistic(z, train.y(), 0.0, k, opts);
  if (!result.converged || result.diverged) {
    result = detail::newton_logistic(z, train.y(), opts.ridge, k, opts);
    model.ridge_fallback = true;
  }
  if (!result.beta.allFinite() || !std::isfinite(result.loglik))
    throw numeric_error("constrained fit produced non-finite coefficients");

  for (Eigen::Index c = 0; c < k; ++c) model.theta[static_cast<Eigen::Index>(active[static_cast<std::size_t>(c)])] = result.beta[c];
  if (opts.intercept) model.intercept = result.beta[k];
  model.train_loglik = result.loglik;
  model.converged = result.converged;
  model.iterations = result.iterations;
  model.loglik_path = std::move(result.path);
  return model;
}

}  // namespace logagg
