#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "knockforge/linalg.hpp"
#include "knockforge/regression.hpp"

namespace knockforge {

// How the penalty of the joint lasso on [X, X̃] is chosen.
struct LcdOptions {
  enum class Rule { kCrossValidated, kMaxFraction, kFixed };
  Rule rule = Rule::kMaxFraction;
  double fraction = 0.01;  // kMaxFraction: λ = fraction·λmax
  double value = 0.0;      // kFixed
  int cv_folds = 5;        // kCrossValidated: contiguous folds
  int cv_grid_size = 30;   // log-spaced from λmax down to cv_grid_ratio·λmax
  double cv_grid_ratio = 1e-2;
  double cv_tol = 1e-5;    // coordinate-descent tolerance along the CV path
  LassoOptions lasso;
};

// Parses "cv", "max100" (λmax/100) or a positive number (fixed λ).
LcdOptions parse_lcd_lambda(const std::string& text);

struct KnockoffStatistics {
  Vector w;
  double lambda = 0.0;
  bool fit_converged = true;
};

// W_j = |β̂_j| − |β̂_{j+p}| from a lasso on the column-standardized [X, X̃].
KnockoffStatistics lcd_statistics(const Matrix& x, const Matrix& x_tilde, const Vector& y,
                                  const LcdOptions& options = {});

// λ minimizing K-fold held-out squared error along a log grid, with warm
// starts down the path. Columns are standardized with training-fold moments.
double lasso_cv_lambda(const Matrix& x, const Vector& y, int folds, int grid_size,
                       double grid_ratio, const LassoOptions& options = {});

constexpr double kInfiniteThreshold = std::numeric_limits<double>::infinity();

// min{t ∈ {|w_j| : w_j ≠ 0} : (1 + #{w ≤ −t}) / #{w ≥ t} ≤ q}, +∞ if none.
double knockoff_threshold(const Vector& w, double q);

// π_j = (1 + #{k : w_k ≤ −w_j}) / p when w_j > 0, otherwise 1.
Vector pi_statistics(const Vector& w);

// Benjamini-Hochberg step-up; returns sorted 0-based indices.
std::vector<std::size_t> bh_select(const Vector& pvalues, double q);

struct SelectionResult {
  std::vector<std::size_t> selected;  // 0-based, sorted
  double threshold = kInfiniteThreshold;
  double q = 0.1;
  Vector pi;
};

// {j : w_j ≥ T_q} together with the π-statistics.
SelectionResult knockoff_select(const Vector& w, double q);

// |S ∩ H₀| / max(|S|, 1).
double fdp(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& h0);

// |S ∩ H₁| / |H₁|; throws ContractViolation for empty H₁.
double power(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& h1);

}  // namespace knockforge
