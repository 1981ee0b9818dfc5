#include "knockforge/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "knockforge/errors.hpp"

namespace knockforge {

namespace {

void check_design(const Matrix& x, const Vector& y, const char* what) {
  if (x.rows() == 0 || x.cols() == 0) {
    throw ContractViolation(std::string(what) + ": empty design matrix");
  }
  if (x.rows() != y.size()) {
    throw ContractViolation(std::string(what) + ": design has " + std::to_string(x.rows()) +
                            " rows but response has " + std::to_string(y.size()));
  }
}

double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

namespace detail {

namespace {

constexpr int kSweepsBeforeDirectSolve = 30;

// Primal active-set refinement. With the signs of the nonzero coordinates
// held fixed the problem is an unconstrained quadratic; move toward its
// minimizer until a coordinate reaches zero, drop it, and repeat. The
// objective never increases. Returns true when the result also satisfies the
// optimality conditions of the inactive coordinates.
bool solve_active_set(const Matrix& gram, const Vector& rhs, const Vector& penalty, Vector& beta,
                      Vector& grad) {
  const Eigen::Index d = beta.size();
  while (true) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (beta(j) != 0.0) active.push_back(j);
    }
    if (active.empty()) return false;
    const auto k = static_cast<Eigen::Index>(active.size());
    Matrix g(k, k);
    Vector b(k);
    Vector current(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      const Eigen::Index ja = active[static_cast<std::size_t>(a)];
      current(a) = beta(ja);
      b(a) = rhs(ja) - (beta(ja) > 0.0 ? penalty(ja) : -penalty(ja));
      for (Eigen::Index c = 0; c < k; ++c) g(a, c) = gram(ja, active[static_cast<std::size_t>(c)]);
    }
    const Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) return false;
    const Vector target = llt.solve(b);
    if (!target.allFinite()) return false;
    double t = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < k; ++a) {
      if ((target(a) > 0.0) != (current(a) > 0.0) || target(a) == 0.0) {
        const double reach = current(a) / (current(a) - target(a));
        if (reach < t) {
          t = reach;
          blocking = a;
        }
      }
    }
    Vector next = current + t * (target - current);
    if (blocking >= 0) next(blocking) = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) beta(active[static_cast<std::size_t>(a)]) = next(a);
    if (blocking < 0) break;
  }
  grad = rhs - gram * beta;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (beta(j) == 0.0 && std::abs(grad(j)) > penalty(j) * (1.0 + 1e-12)) return false;
  }
  return true;
}

}  // namespace

CoordinateDescentResult coordinate_descent_gram(const Matrix& gram, const Vector& rhs,
                                                const Vector& penalty, Vector& beta,
                                                double tol, int max_sweeps) {
  const Eigen::Index d = gram.rows();
  Vector grad = rhs - gram * beta;
  CoordinateDescentResult result;

  auto update = [&](Eigen::Index j) -> double {
    const double diag = gram(j, j);
    if (diag <= 0.0) return 0.0;
    const double old = beta(j);
    const double next = soft_threshold(grad(j) + diag * old, penalty(j)) / diag;
    if (next == old) return 0.0;
    const double delta = next - old;
    beta(j) = next;
    grad.noalias() -= delta * gram.col(j);
    return std::abs(delta) * std::sqrt(diag);
  };

  std::vector<Eigen::Index> active;
  while (result.sweeps < max_sweeps) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) max_change = std::max(max_change, update(j));
    ++result.sweeps;
    if (max_change < tol) {
      result.converged = true;
      return result;
    }
    active.clear();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (beta(j) != 0.0) active.push_back(j);
    }
    int stalled = 0;
    while (result.sweeps < max_sweeps) {
      double active_change = 0.0;
      for (Eigen::Index j : active) active_change = std::max(active_change, update(j));
      ++result.sweeps;
      if (active_change < tol) break;
      if (++stalled == kSweepsBeforeDirectSolve) {
        solve_active_set(gram, rhs, penalty, beta, grad);
        break;
      }
    }
  }
  return result;
}

}  // namespace detail

Vector LassoFit::predict(const Matrix& x) const {
  if (x.cols() != coefficients.size()) {
    throw ContractViolation("lasso predict: expected " + std::to_string(coefficients.size()) +
                            " columns, got " + std::to_string(x.cols()));
  }
  return (x * coefficients).array() + intercept;
}

double lambda_max(const Matrix& x, const Vector& y) {
  check_design(x, y, "lambda_max");
  const Vector centered_y = y.array() - y.mean();
  const Matrix centered_x = x.rowwise() - x.colwise().mean();
  return (centered_x.transpose() * centered_y).cwiseAbs().maxCoeff() /
         static_cast<double>(x.rows());
}

double default_lambda(const Matrix& x, const Vector& y) { return lambda_max(x, y) / 100.0; }

LassoFit lasso_fit(const Matrix& x, const Vector& y, double lambda, const LassoOptions& options) {
  check_design(x, y, "lasso_fit");
  if (!(lambda >= 0.0)) throw ContractViolation("lasso_fit: lambda must be nonnegative");
  if (!(options.tol > 0.0)) throw ContractViolation("lasso_fit: tol must be positive");

  const double n = static_cast<double>(x.rows());
  const Eigen::Index d = x.cols();
  const ColumnMoments moments = column_moments(x);
  const double y_mean = y.mean();

  LassoFit fit;
  fit.lambda = lambda;
  fit.coefficients = Vector::Zero(d);

  if (lambda >= lambda_max(x, y)) {
    fit.intercept = y_mean;
    fit.converged = true;
    return fit;
  }

  const Matrix xs = standardize_columns(x);
  const Vector yc = y.array() - y_mean;
  Matrix gram(d, d);
  gram.setZero();
  gram.selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose(), 1.0 / n);
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Vector rhs = xs.transpose() * yc / n;

  Vector penalty(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    penalty(j) = moments.sd(j) > 0.0 ? lambda / moments.sd(j)
                                     : std::numeric_limits<double>::infinity();
  }
  Vector beta_std = Vector::Zero(d);
  const auto cd = detail::coordinate_descent_gram(gram, rhs, penalty, beta_std, options.tol,
                                                  options.max_iter);
  for (Eigen::Index j = 0; j < d; ++j) {
    fit.coefficients(j) = moments.sd(j) > 0.0 ? beta_std(j) / moments.sd(j) : 0.0;
  }
  fit.intercept = y_mean - moments.mean.dot(fit.coefficients);
  fit.n_iterations = cd.sweeps;
  fit.converged = cd.converged;
  if (!cd.converged) {
    fit.warnings.push_back("lasso_fit: no convergence after " + std::to_string(cd.sweeps) +
                           " sweeps (lambda=" + std::to_string(lambda) + ")");
  }
  return fit;
}

double lasso_kkt_violation(const Matrix& x, const Vector& y, const LassoFit& fit) {
  check_design(x, y, "lasso_kkt_violation");
  const double n = static_cast<double>(x.rows());
  const Vector residual = y - fit.predict(x);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Vector corr = centered.transpose() * residual / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double b = fit.coefficients(j);
    const double violation = b != 0.0 ? std::abs(corr(j) - fit.lambda * (b > 0 ? 1.0 : -1.0))
                                      : std::max(0.0, std::abs(corr(j)) - fit.lambda);
    worst = std::max(worst, violation);
  }
  return worst;
}

double lasso_objective(const Matrix& x, const Vector& y, const Vector& beta, double intercept,
                       double lambda) {
  const Vector residual = (y - x * beta).array() - intercept;
  return 0.5 * residual.squaredNorm() / static_cast<double>(x.rows()) +
         lambda * beta.lpNorm<1>();
}

// ---------------------------------------------------------------------------

LinearClassifierFit classifier_fit(const Matrix& z, const std::vector<int>& labels,
                                   double l2_penalty, const ClassifierOptions& options) {
  const Eigen::Index m = z.rows();
  const Eigen::Index d = z.cols();
  if (m == 0 || static_cast<std::size_t>(m) != labels.size()) {
    throw ContractViolation("classifier_fit: feature rows and labels differ in length");
  }
  if (!(l2_penalty > 0.0)) throw ContractViolation("classifier_fit: l2_penalty must be positive");
  bool has_zero = false, has_one = false;
  Vector target(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l != 0 && l != 1) throw ContractViolation("classifier_fit: labels must be 0 or 1");
    has_zero |= l == 0;
    has_one |= l == 1;
    target(i) = l;
  }
  if (!has_zero || !has_one) {
    throw ContractViolation("classifier_fit: training data contains a single class");
  }

  const ColumnMoments moments = column_moments(z);
  Matrix design(m, d + 1);
  design.leftCols(d) = standardize_columns(z);
  design.col(d).setOnes();

  Vector theta = Vector::Zero(d + 1);
  auto objective = [&](const Vector& t, const Vector& scores) {
    double value = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) value += softplus(scores(i)) - target(i) * scores(i);
    return value + 0.5 * l2_penalty * t.head(d).squaredNorm();
  };

  LinearClassifierFit fit;
  fit.l2_penalty = l2_penalty;
  Vector scores = design * theta;
  double current = objective(theta, scores);
  fit.objective_trace.push_back(current);

  for (int iter = 0; iter < options.max_iter; ++iter) {
    Vector prob(m), curvature(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      prob(i) = sigmoid(scores(i));
      curvature(i) = prob(i) * (1.0 - prob(i));
    }
    Vector grad = design.transpose() * (prob - target);
    grad.head(d) += l2_penalty * theta.head(d);
    Matrix hessian = design.transpose() * curvature.asDiagonal() * design;
    hessian.diagonal().head(d).array() += l2_penalty;
    hessian(d, d) += 1e-12;
    const Vector step = hessian.ldlt().solve(grad);
    const double decrement = grad.dot(step);
    fit.n_iterations = iter + 1;
    if (!(decrement >= 0.0) || 0.5 * decrement < options.tol) {
      fit.converged = true;
      break;
    }
    double t = 1.0;
    Vector candidate;
    Vector candidate_scores;
    double candidate_value = current;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      candidate = theta - t * step;
      candidate_scores = design * candidate;
      candidate_value = objective(candidate, candidate_scores);
      if (candidate_value <= current - 1e-4 * t * decrement) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No representable decrease left; the iterate is optimal to precision.
      fit.converged = true;
      break;
    }
    theta = candidate;
    scores = candidate_scores;
    current = candidate_value;
    fit.objective_trace.push_back(current);
  }

  fit.weights = Vector::Zero(d);
  fit.bias = theta(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (moments.sd(j) > 0.0) {
      fit.weights(j) = theta(j) / moments.sd(j);
      fit.bias -= fit.weights(j) * moments.mean(j);
    }
  }
  return fit;
}

Vector classifier_scores(const LinearClassifierFit& fit, const Matrix& z) {
  if (z.cols() != fit.weights.size()) {
    throw ContractViolation("classifier_predict: expected " + std::to_string(fit.weights.size()) +
                            " features, got " + std::to_string(z.cols()));
  }
  return (z * fit.weights).array() + fit.bias;
}

std::vector<int> classifier_predict(const LinearClassifierFit& fit, const Matrix& z) {
  const Vector scores = classifier_scores(fit, z);
  std::vector<int> labels(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    labels[static_cast<std::size_t>(i)] = scores(i) > 0.0 ? 1 : 0;
  }
  return labels;
}

// ---------------------------------------------------------------------------

LambdaRule lambda_max_fraction(double fraction) {
  return [fraction](const Matrix& design, const Vector& target) {
    return fraction * lambda_max(design, target);
  };
}

namespace {

class LassoPredictor : public Predictor {
 public:
  explicit LassoPredictor(LassoFit fit) : fit_(std::move(fit)) {}
  Vector predict(const Matrix& design) const override { return fit_.predict(design); }
  double penalty() const override { return fit_.lambda; }
  bool converged() const override { return fit_.converged; }

 private:
  LassoFit fit_;
};

}  // namespace

std::unique_ptr<Predictor> LassoLearner::fit(const Matrix& design, const Vector& target,
                                             const FitContext&) const {
  return std::make_unique<LassoPredictor>(lasso_fit(design, target, rule_(design, target), options_));
}

}  // namespace knockforge
