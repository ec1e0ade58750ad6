#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"
#include "logagg/glm.hpp"
#include "logagg/seed.hpp"

namespace logagg {

enum class CovariateModel { independent, ar1, ar2 };

inline std::string to_string(CovariateModel m) {
  switch (m) {
    case CovariateModel::independent: return "indep";
    case CovariateModel::ar1: return "ar1";
    case CovariateModel::ar2: return "ar2";
  }
  return "?";
}

inline CovariateModel parse_covariate_model(const std::string& s) {
  if (s == "indep" || s == "independent") return CovariateModel::independent;
  if (s == "ar1") return CovariateModel::ar1;
  if (s == "ar2") return CovariateModel::ar2;
  throw validation_error("unknown covariate model '" + s + "' (expected indep, ar1 or ar2)");
}

struct ScenarioSpec {
  CovariateModel model = CovariateModel::independent;
  std::size_t n = 300;
  std::size_t p = 1000;
  std::size_t correlated_block = 100;
  std::uint64_t seed = 0;
  // Off-diagonal precision entries. The defaults are strictly diagonally
  // dominant, so the band matrix is positive definite for any block size.
  double rho1 = 0.4;       // ar1 lag-1 band
  double rho2_lag1 = 0.3;  // ar2 lag-1 band
  double rho2_lag2 = 0.15; // ar2 lag-2 band

  void validate() const {
    if (n < 2) throw validation_error("scenario needs n >= 2");
    if (p < 5) throw validation_error("scenario needs p >= 5");
    if (model != CovariateModel::independent) {
      if (correlated_block < 1) throw validation_error("correlated block must be >= 1");
      if (correlated_block > p)
        throw validation_error("correlated block " + std::to_string(correlated_block) + " exceeds p=" +
                               std::to_string(p));
    }
  }
};

struct TrueCoefficients {
  VectorXd theta;
  std::vector<std::size_t> support;
};

/// theta = (2, 2, 2, 2, 2, 0, ..., 0).
inline TrueCoefficients true_theta(std::size_t p) {
  if (p < 5) throw validation_error("true coefficient vector needs p >= 5");
  TrueCoefficients t;
  t.theta = VectorXd::Zero(static_cast<Eigen::Index>(p));
  t.theta.head(5).setConstant(2.0);
  t.support = {0, 1, 2, 3, 4};
  return t;
}

/// Symmetric banded matrix stored by diagonals: band[d][i] = A(i, i + d).
struct BandedMatrix {
  std::size_t size = 0;
  std::vector<std::vector<double>> band;

  std::size_t bandwidth() const { return band.empty() ? 0 : band.size() - 1; }
  double at(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    const std::size_t d = j - i;
    return d <= bandwidth() ? band[d][i] : 0.0;
  }
  MatrixXd dense() const {
    MatrixXd a = MatrixXd::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(i, j);
    return a;
  }
};

/// Unit-diagonal precision with the given off-diagonal bands (lag 1, lag 2, ...).
inline BandedMatrix banded_precision(std::size_t size, const std::vector<double>& off_diagonals) {
  BandedMatrix m;
  m.size = size;
  m.band.emplace_back(size, 1.0);
  for (std::size_t d = 1; d <= off_diagonals.size(); ++d)
    m.band.emplace_back(size > d ? size - d : 0, off_diagonals[d - 1]);
  return m;
}

inline BandedMatrix scenario_precision(const ScenarioSpec& spec) {
  switch (spec.model) {
    case CovariateModel::ar1: return banded_precision(spec.correlated_block, {spec.rho1});
    case CovariateModel::ar2: return banded_precision(spec.correlated_block, {spec.rho2_lag1, spec.rho2_lag2});
    case CovariateModel::independent: break;
  }
  return banded_precision(0, {});
}

/// Upper Cholesky factor R (A = R^T R) of a banded SPD matrix, in the same
/// diagonal storage: r[d][i] = R(i, i + d). O(size * bandwidth^2).
inline BandedMatrix banded_cholesky(const BandedMatrix& a) {
  const std::size_t n = a.size, w = a.bandwidth();
  BandedMatrix r;
  r.size = n;
  r.band.resize(w + 1);
  for (std::size_t d = 0; d <= w; ++d) r.band[d].assign(n > d ? n - d : 0, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // R(i, i) = sqrt(A(i,i) - sum_{k<i} R(k,i)^2); only k >= i - w contribute.
    double diag = a.band[0][i];
    for (std::size_t k = i > w ? i - w : 0; k < i; ++k) {
      const double rki = r.band[i - k][k];
      diag -= rki * rki;
    }
    if (!(diag > 0.0))
      throw validation_error("band parameters do not give a positive-definite precision matrix (pivot " +
                             std::to_string(i) + ")");
    const double rii = std::sqrt(diag);
    r.band[0][i] = rii;
    for (std::size_t j = i + 1; j <= std::min(n - 1, i + w); ++j) {
      double v = a.band[j - i][i];
      for (std::size_t k = j > w ? j - w : 0; k < i; ++k) v -= r.band[i - k][k] * r.band[j - k][k];
      r.band[j - i][i] = v / rii;
    }
  }
  return r;
}

/// Solves R x = z in place for the upper banded factor R.
inline void banded_upper_solve(const BandedMatrix& r, double* z) {
  const std::size_t n = r.size, w = r.bandwidth();
  for (std::size_t ii = n; ii-- > 0;) {
    double v = z[ii];
    for (std::size_t j = ii + 1; j <= std::min(n - 1, ii + w); ++j) v -= r.band[j - ii][ii] * z[j];
    z[ii] = v / r.band[0][ii];
  }
}

/// n x p Gaussian covariates. For the AR scenarios the first block has
/// covariance equal to the inverse of the banded precision; the rest is i.i.d.
/// standard normal.
inline MatrixXd gen_covariates(const ScenarioSpec& spec, std::uint64_t stream = stage::covariates) {
  spec.validate();
  const std::size_t block = spec.model == CovariateModel::independent ? 0 : spec.correlated_block;
  BandedMatrix factor;
  if (block) factor = banded_cholesky(scenario_precision(spec));

  std::mt19937_64 rng(derive_seed(spec.seed, {stream}));
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.p));
  std::vector<double> row(spec.p);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (double& v : row) v = normal(rng);
    if (block) banded_upper_solve(factor, row.data());
    for (std::size_t j = 0; j < spec.p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return x;
}

/// y_i ~ Bernoulli(sigmoid(x_i^T theta)), independently.
inline VectorXd gen_response(const MatrixXd& x, const TrueCoefficients& truth, std::uint64_t seed) {
  if (x.cols() != truth.theta.size())
    throw validation_error("covariate matrix has " + std::to_string(x.cols()) + " columns but theta has length " +
                           std::to_string(truth.theta.size()));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const VectorXd eta = x * truth.theta;
  VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = unif(rng) < sigmoid(eta[i]) ? 1.0 : 0.0;
  return y;
}

/// Training draw of a scenario.
inline Dataset simulate(const ScenarioSpec& spec) {
  const auto truth = true_theta(spec.p);
  MatrixXd x = gen_covariates(spec, stage::covariates);
  VectorXd y = gen_response(x, truth, derive_seed(spec.seed, {stage::response}));
  return Dataset(std::move(x), std::move(y));
}

/// Independent test draw from the same law, on seed streams disjoint from the
/// training draw.
inline Dataset simulate_test(const ScenarioSpec& spec, std::size_t n_test) {
  ScenarioSpec test = spec;
  test.n = n_test;
  const auto truth = true_theta(spec.p);
  MatrixXd x = gen_covariates(test, stage::test_covariates);
  VectorXd y = gen_response(x, truth, derive_seed(spec.seed, {stage::test_response}));
  return Dataset(std::move(x), std::move(y));
}

}  // namespace logagg
