#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "logagg/error.hpp"

namespace logagg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline std::vector<std::string> default_feature_names(std::size_t p) {
  std::vector<std::string> names;
  names.reserve(p);
  for (std::size_t j = 0; j < p; ++j) names.push_back("f" + std::to_string(j));
  return names;
}

/// Immutable n x p design matrix with binary labels.
///
/// The covariates are stored column-major so that per-feature access (the
/// inner loop of coordinate ascent and of single-feature tests) is contiguous.
class Dataset {
 public:
  Dataset(MatrixXd x, VectorXd y, std::vector<std::string> feature_names = {})
      : x_(std::move(x)), y_(std::move(y)), names_(std::move(feature_names)) {
    if (names_.empty()) names_ = default_feature_names(static_cast<std::size_t>(x_.cols()));
    validate();
  }

  std::size_t n() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(x_.cols()); }
  const MatrixXd& x() const { return x_; }
  const VectorXd& y() const { return y_; }
  const std::vector<std::string>& feature_names() const { return names_; }

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(y_.begin(), y_.end(), 1.0));
  }

  bool operator==(const Dataset& other) const {
    return x_.rows() == other.x_.rows() && x_.cols() == other.x_.cols() && x_ == other.x_ &&
           y_ == other.y_ && names_ == other.names_;
  }

 private:
  void validate() const {
    if (x_.rows() < 1) throw validation_error("dataset must have at least one row");
    if (x_.cols() < 1) throw validation_error("dataset must have at least one feature");
    if (y_.size() != x_.rows())
      throw validation_error("label vector length " + std::to_string(y_.size()) +
                             " does not match row count " + std::to_string(x_.rows()));
    if (names_.size() != p())
      throw validation_error("expected " + std::to_string(p()) + " feature names, got " +
                             std::to_string(names_.size()));
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      if (y_[i] != 0.0 && y_[i] != 1.0)
        throw validation_error("label at row " + std::to_string(i) + " is not 0 or 1");
    }
    if (!x_.allFinite()) {
      for (Eigen::Index j = 0; j < x_.cols(); ++j)
        for (Eigen::Index i = 0; i < x_.rows(); ++i)
          if (!std::isfinite(x_(i, j)))
            throw validation_error("non-finite covariate at row " + std::to_string(i) +
                                   ", column " + names_[static_cast<std::size_t>(j)]);
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : names_)
      if (!seen.insert(name).second) throw validation_error("duplicate feature name '" + name + "'");
  }

  MatrixXd x_;
  VectorXd y_;
  std::vector<std::string> names_;
};

/// Fixed-length bit vector marking the active features of a sub-model.
class SparsityPattern {
 public:
  SparsityPattern() = default;
  explicit SparsityPattern(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

  static SparsityPattern from_indices(std::size_t size, std::span<const std::size_t> indices) {
    SparsityPattern pattern(size);
    for (std::size_t j : indices) pattern.set(j, true);
    return pattern;
  }

  std::size_t size() const { return size_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool test(std::size_t j) const {
    check(j);
    return (words_[j / 64] >> (j % 64)) & 1ULL;
  }

  void set(std::size_t j, bool on) {
    if (test(j) != on) flip(j);
  }

  void flip(std::size_t j) {
    check(j);
    const std::uint64_t mask = 1ULL << (j % 64);
    words_[j / 64] ^= mask;
    if (words_[j / 64] & mask)
      ++count_;
    else
      --count_;
  }

  SparsityPattern flipped(std::size_t j) const {
    SparsityPattern copy = *this;
    copy.flip(j);
    return copy;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
        bits &= bits - 1;
      }
    }
    return out;
  }

  std::size_t recount() const {
    std::size_t c = 0;
    for (std::uint64_t w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  std::size_t hash() const {
    std::size_t h = std::hash<std::size_t>{}(size_);
    for (std::uint64_t w : words_) h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }

  bool operator==(const SparsityPattern& other) const {
    return size_ == other.size_ && words_ == other.words_;
  }

  // Lexicographic on (count, words); gives a stable order for reports.
  bool operator<(const SparsityPattern& other) const {
    if (count_ != other.count_) return count_ < other.count_;
    return words_ < other.words_;
  }

 private:
  void check(std::size_t j) const {
    if (j >= size_)
      throw validation_error("pattern index " + std::to_string(j) + " out of range for length " +
                             std::to_string(size_));
  }

  std::size_t size_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint64_t> words_;
};

struct SparsityPatternHash {
  std::size_t operator()(const SparsityPattern& pattern) const { return pattern.hash(); }
};

/// Row partition into an estimation half and an aggregation half.
struct SplitSpec {
  std::vector<std::size_t> first_indices;
  std::vector<std::size_t> second_indices;
  std::uint64_t seed = 0;
};

/// Random partition of the rows. |first| = floor(n * ratio). With `stratified`
/// each class is split separately and its share in the first part stays within
/// one observation of n_class * ratio.
inline SplitSpec split(const Dataset& dataset, double ratio, std::uint64_t seed, bool stratified = false) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw validation_error("split ratio must lie in (0, 1)");
  const std::size_t n = dataset.n();
  const auto n_first = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio));
  if (n_first < 1 || n - n_first < 1)
    throw validation_error("split ratio " + std::to_string(ratio) + " leaves an empty subsample for n=" +
                           std::to_string(n));

  std::mt19937_64 rng(seed);
  SplitSpec spec;
  spec.seed = seed;

  if (!stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    spec.first_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_first));
    spec.second_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_first), order.end());
  } else {
    std::vector<std::size_t> classes[2];
    for (std::size_t i = 0; i < n; ++i) classes[dataset.y()[static_cast<Eigen::Index>(i)] == 1.0].push_back(i);
    for (int c = 0; c < 2; ++c)
      if (classes[c].size() < 2)
        throw validation_error("stratified split needs at least 2 members per class; class " +
                               std::to_string(c) + " has " + std::to_string(classes[c].size()));

    // Floor allocation first, then hand out the remainder by largest fractional part.
    std::size_t take[2];
    double frac[2];
    for (int c = 0; c < 2; ++c) {
      const double exact = static_cast<double>(classes[c].size()) * ratio;
      take[c] = static_cast<std::size_t>(std::floor(exact));
      frac[c] = exact - static_cast<double>(take[c]);
    }
    std::size_t remaining = n_first - take[0] - take[1];
    while (remaining > 0) {
      const int c = frac[1] > frac[0] ? 1 : 0;
      ++take[c];
      frac[c] = -1.0;
      --remaining;
    }
    for (int c = 0; c < 2; ++c) {
      std::shuffle(classes[c].begin(), classes[c].end(), rng);
      spec.first_indices.insert(spec.first_indices.end(), classes[c].begin(),
                                classes[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
      spec.second_indices.insert(spec.second_indices.end(),
                                 classes[c].begin() + static_cast<std::ptrdiff_t>(take[c]), classes[c].end());
    }
  }
  std::sort(spec.first_indices.begin(), spec.first_indices.end());
  std::sort(spec.second_indices.begin(), spec.second_indices.end());
  return spec;
}

/// Row subset in the given order, keeping column order and names.
inline Dataset restrict(const Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw validation_error("restrict needs at least one row index");
  MatrixXd x(static_cast<Eigen::Index>(indices.size()), dataset.x().cols());
  VectorXd y(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= dataset.n())
      throw validation_error("row index " + std::to_string(indices[r]) + " out of range for n=" +
                             std::to_string(dataset.n()));
    const auto src = static_cast<Eigen::Index>(indices[r]);
    x.row(static_cast<Eigen::Index>(r)) = dataset.x().row(src);
    y[static_cast<Eigen::Index>(r)] = dataset.y()[src];
  }
  return Dataset(std::move(x), std::move(y), dataset.feature_names());
}

}  // namespace logagg
