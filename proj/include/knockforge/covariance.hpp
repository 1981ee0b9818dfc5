#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "knockforge/linalg.hpp"

namespace knockforge {

enum class CovarianceMethod { kEmpirical, kLedoitWolf, kGraphicalLasso, kOracle };

std::string to_string(CovarianceMethod method);

struct CovarianceEstimate {
  Matrix sigma;  // symmetric p×p
  CovarianceMethod method = CovarianceMethod::kEmpirical;
  // Ledoit-Wolf intensity δ, graphical-lasso α, 0 otherwise.
  double shrinkage_or_penalty = 0.0;
  double min_eigenvalue = 0.0;
  std::vector<std::string> warnings;
};

// Wraps a known covariance (e.g. the simulation's exact Σ).
CovarianceEstimate oracle_estimate(const Matrix& sigma);

// (1/n)·(X − x̄)ᵀ(X − x̄). Requires n ≥ 2.
CovarianceEstimate empirical_covariance(const Matrix& x);

// Shrinks the empirical covariance S toward (tr(S)/p)·I with the
// closed-form optimal intensity δ ∈ [0, 1]. Throws DegenerateInput when
// tr(S) = 0.
CovarianceEstimate ledoit_wolf(const Matrix& x);

struct GraphicalLassoOptions {
  double tol = 1e-4;  // on |duality gap|
  int max_iter = 100;
  double inner_tol = 1e-6;
  int inner_max_iter = 1000;
};

struct GraphicalLassoFit {
  CovarianceEstimate estimate;
  Matrix precision;
  std::vector<double> duality_gaps;  // one per outer iteration
  std::vector<double> objectives;    // penalized negative log-likelihood
  int n_iterations = 0;
  bool converged = false;
};

// Block coordinate descent over the columns of the covariance, each block an
// inner lasso (off-diagonal ℓ1 penalty α on the precision). Throws
// ContractViolation for α ≤ 0 and NumericalFailure if the iterates lose
// positive definiteness.
GraphicalLassoFit graphical_lasso(const Matrix& x, double alpha,
                                  const GraphicalLassoOptions& options = {});
// Same, from a precomputed empirical covariance.
GraphicalLassoFit graphical_lasso_from_covariance(const Matrix& empirical, double alpha,
                                                  const GraphicalLassoOptions& options = {});

inline const std::vector<double> kDefaultAlphaFactors = {0.01, 0.05, 0.1, 0.2, 0.5};

// factors × max |off-diagonal of the empirical correlation|.
std::vector<double> default_alpha_grid(const Matrix& x,
                                       const std::vector<double>& factors = kDefaultAlphaFactors);

// Duality-gap and inner tolerances of the fits inside alpha selection. The held-out
// likelihood is settled long before the gap reaches the solver default.
inline constexpr double kSelectionGlassoTol = 1e-2;

// Held-out Gaussian log-likelihood, log det Θ − tr(S_test·Θ), summed over
// folds, for every grid value. Non-finite when a fit fails.
std::vector<double> alpha_grid_scores(const Matrix& x, const std::vector<double>& grid,
                                      int folds, std::uint64_t seed, std::size_t workers = 1,
                                      const GraphicalLassoOptions& options = {kSelectionGlassoTol, 100, 1e-5});

// Grid value with the highest cross-validated score; ties go to the earlier
// grid entry.
double alpha_grid_select(const Matrix& x, const std::vector<double>& grid, int folds,
                         std::uint64_t seed, std::size_t workers = 1);

// Fold label (0..folds-1) of each row; a seeded permutation dealt round-robin.
std::vector<int> fold_labels(std::size_t n, int folds, std::uint64_t seed);

struct PsdRepair {
  Matrix matrix;
  double jitter = 0.0;  // ε added to the diagonal, 0 when untouched
  std::vector<std::string> warnings;
};

// Returns sigma unchanged when λ_min ≥ floor; otherwise sigma + ε·I with the
// smallest ε lifting λ_min to floor (plus a rounding margin). Throws
// NonPsdError when ε would exceed jitter_max.
PsdRepair assert_psd(const Matrix& sigma, double jitter_max, double floor = 0.0);

// Dispatches on the method. For the graphical lasso α is chosen from the
// factor grid by held-out likelihood unless fixed.
struct CovarianceOptions {
  CovarianceMethod method = CovarianceMethod::kLedoitWolf;
  std::vector<double> alpha_factors = kDefaultAlphaFactors;
  int alpha_folds = 3;
  std::optional<double> alpha;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  GraphicalLassoOptions glasso;
  // Fit the graphical lasso to standardized columns and rescale afterwards.
  bool correlation_scale = false;
  Matrix oracle;  // required for kOracle
};

CovarianceEstimate estimate_covariance(const Matrix& x, const CovarianceOptions& options);

// "empirical", "lw", "glasso", "oracle"; throws UsageError.
CovarianceMethod parse_covariance_method(const std::string& name);

}  // namespace knockforge
