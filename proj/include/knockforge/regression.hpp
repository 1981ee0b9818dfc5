#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "knockforge/linalg.hpp"

namespace knockforge {

// ---------------------------------------------------------------------------
// Lasso
// ---------------------------------------------------------------------------

struct LassoOptions {
  double tol = 1e-8;     // max standardized coefficient change per sweep
  int max_iter = 10000;  // coordinate-descent sweeps
};

// Minimizer of (1/2n)‖y − intercept − Xβ‖² + λ‖β‖₁ on the original column
// scale. Coefficients are in the units of X.
struct LassoFit {
  Vector coefficients;
  double lambda = 0.0;
  double intercept = 0.0;
  int n_iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  Vector predict(const Matrix& x) const;
};

// (1/n)·max_j |x_jᵀ(y − ȳ)| with x_j centered. The smallest λ at which the
// lasso solution is identically zero.
double lambda_max(const Matrix& x, const Vector& y);

// lambda_max / 100.
double default_lambda(const Matrix& x, const Vector& y);

// Cyclic coordinate descent with covariance (Gram) updates. Columns are
// standardized internally; the penalty is applied to the original-scale
// coefficients. Non-convergence is reported through `converged` and
// `warnings`, never thrown.
LassoFit lasso_fit(const Matrix& x, const Vector& y, double lambda,
                   const LassoOptions& options = {});

// Largest violation of the lasso KKT conditions over all columns, evaluated
// with centered columns and the fit's residual.
double lasso_kkt_violation(const Matrix& x, const Vector& y, const LassoFit& fit);

// (1/2n)‖y − intercept − Xβ‖² + λ‖β‖₁.
double lasso_objective(const Matrix& x, const Vector& y, const Vector& beta,
                       double intercept, double lambda);

namespace detail {

struct CoordinateDescentResult {
  int sweeps = 0;
  bool converged = false;
};

// Minimizes ½βᵀQβ − rhsᵀβ + Σ_j penalty_j·|β_j| in place, starting from the
// given beta. Coordinates are visited in index order; a full sweep is followed
// by sweeps over the active set until those settle.
CoordinateDescentResult coordinate_descent_gram(const Matrix& gram, const Vector& rhs,
                                                const Vector& penalty, Vector& beta,
                                                double tol, int max_sweeps);

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear classifier (L2-regularized logistic loss)
// ---------------------------------------------------------------------------

struct ClassifierOptions {
  double tol = 1e-12;  // Newton decrement threshold
  int max_iter = 100;
};

struct LinearClassifierFit {
  Vector weights;  // raw feature scale
  double bias = 0.0;
  double l2_penalty = 0.0;
  int n_iterations = 0;
  bool converged = false;
  // Objective value at the start and after every accepted Newton step.
  std::vector<double> objective_trace;
};

// Newton's method on Σ_i logloss(zᵢ, lᵢ) + (l2_penalty/2)·‖w‖² with features
// standardized internally; the bias is unpenalized. Starts from zero weights.
LinearClassifierFit classifier_fit(const Matrix& z, const std::vector<int>& labels,
                                   double l2_penalty, const ClassifierOptions& options = {});

Vector classifier_scores(const LinearClassifierFit& fit, const Matrix& z);

// Label 1 when the score is strictly positive, else 0.
std::vector<int> classifier_predict(const LinearClassifierFit& fit, const Matrix& z);

// ---------------------------------------------------------------------------
// Pluggable regression learners (used by the nonparametric generators)
// ---------------------------------------------------------------------------

// Describes where a design column came from, so that learners with outside
// knowledge (e.g. a known covariance in tests) can interpret the design.
struct DesignColumn {
  enum class Source { kOriginal, kKnockoff };
  Source source;
  std::size_t index;
};

struct FitContext {
  std::size_t target_column = 0;
  std::vector<DesignColumn> columns;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Vector predict(const Matrix& design) const = 0;
  virtual double penalty() const { return 0.0; }
  virtual bool converged() const { return true; }
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::unique_ptr<Predictor> fit(const Matrix& design, const Vector& target,
                                         const FitContext& context) const = 0;
};

using LambdaRule = std::function<double(const Matrix& design, const Vector& target)>;

// λ = fraction · lambda_max(design, target).
LambdaRule lambda_max_fraction(double fraction = 0.01);

class LassoLearner : public Learner {
 public:
  explicit LassoLearner(LambdaRule rule = lambda_max_fraction(), LassoOptions options = {})
      : rule_(std::move(rule)), options_(options) {}

  std::unique_ptr<Predictor> fit(const Matrix& design, const Vector& target,
                                 const FitContext& context) const override;

 private:
  LambdaRule rule_;
  LassoOptions options_;
};

}  // namespace knockforge
