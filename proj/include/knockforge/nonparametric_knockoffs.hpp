#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "knockforge/linalg.hpp"
#include "knockforge/regression.hpp"

namespace knockforge {

enum class KnockoffMethod { kGaussian, kSequential, kParallel, kCrossfit };

std::string to_string(KnockoffMethod method);
// Accepts "gaussian", "sequential", "parallel", "crossfit"; throws UsageError.
KnockoffMethod parse_knockoff_method(const std::string& name);

struct ColumnLog {
  std::size_t column = 0;
  double lambda = 0.0;             // penalty reported by the learner
  double residual_variance = 0.0;  // population variance of the residuals
  bool converged = true;
};

struct KnockoffPair {
  Matrix x;
  Matrix x_tilde;
  KnockoffMethod method = KnockoffMethod::kGaussian;
  std::uint64_t seed = 0;
  std::vector<ColumnLog> generation_log;
  std::vector<std::string> warnings;
  // n×p fitted values f_j(row i) and residuals ε̂_ij. For sequential and
  // parallel generation, column j of x_tilde − fitted is a permutation of
  // column j of residuals.
  Matrix fitted;
  Matrix residuals;
};

struct NonparametricOptions {
  // Penalty rule for the default lasso learner.
  LambdaRule lambda_rule = lambda_max_fraction(0.01);
  // Replaces the lasso when set.
  std::shared_ptr<const Learner> learner;
  std::size_t workers = 1;
  // Parallel method only: one permutation shared by every column.
  bool shared_permutation = false;
};

// Column j is regressed on (X_{-j}, X̃_{1:j-1}) in input order; its knockoff is
// the prediction plus permuted residuals.
KnockoffPair sequential_knockoffs(const Matrix& x, std::uint64_t seed,
                                  const NonparametricOptions& options = {});

// Column j is regressed on X_{-j} only, so all fits are independent. Output is
// identical for every worker count.
KnockoffPair parallel_knockoffs(const Matrix& x, std::uint64_t seed,
                                const NonparametricOptions& options = {});

// Sequential generation with K-fold cross-fitting: regressors are trained on
// the complement of each fold (using an auxiliary knockoff of those rows) and
// the residual pool comes from the held-out fold. Residuals are drawn
// uniformly with replacement from the pool.
KnockoffPair crossfit_knockoffs(const Matrix& x, int folds, std::uint64_t seed,
                                const NonparametricOptions& options = {});

// eps reordered by a uniform permutation drawn from the seed.
Vector permute_residuals(const Vector& eps, std::uint64_t seed);

// The permutation used by permute_residuals for the same (n, seed).
std::vector<std::size_t> residual_permutation(std::size_t n, std::uint64_t seed);

namespace detail {

// Fold label per row, each uniform on [0, folds) independently. Redraws with
// the next attempt index until every fold is nonempty; `attempts` receives the
// number of redraws.
std::vector<int> crossfit_fold_labels(std::size_t n, int folds, std::uint64_t seed,
                                      int* attempts = nullptr);

}  // namespace detail

}  // namespace knockforge
