#include "knockforge/inference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "knockforge/errors.hpp"

namespace knockforge {

LcdOptions parse_lcd_lambda(const std::string& text) {
  LcdOptions options;
  if (text == "max100") return options;
  if (text == "cv") {
    options.rule = LcdOptions::Rule::kCrossValidated;
    return options;
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(value > 0.0)) {
    throw UsageError("lambda must be 'cv', 'max100' or a positive number, got '" + text + "'");
  }
  options.rule = LcdOptions::Rule::kFixed;
  options.value = value;
  return options;
}

double lasso_cv_lambda(const Matrix& x, const Vector& y, int folds, int grid_size,
                       double grid_ratio, const LassoOptions& options) {
  if (folds < 2) throw ContractViolation("lasso_cv_lambda: need at least 2 folds");
  if (grid_size < 1 || !(grid_ratio > 0.0 && grid_ratio < 1.0)) {
    throw ContractViolation("lasso_cv_lambda: invalid grid");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2 * folds) throw ContractViolation("lasso_cv_lambda: too few rows for the folds");
  const double top = lambda_max(x, y);
  if (top == 0.0) return 0.0;

  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  for (int g = 0; g < grid_size; ++g) {
    const double t = grid_size == 1 ? 0.0 : static_cast<double>(g) / (grid_size - 1);
    grid[static_cast<std::size_t>(g)] = top * std::pow(grid_ratio, t);
  }
  std::vector<double> error(grid.size(), 0.0);

  for (int k = 0; k < folds; ++k) {
    const Eigen::Index begin = n * k / folds;
    const Eigen::Index end = n * (k + 1) / folds;
    const Eigen::Index n_test = end - begin;
    const Eigen::Index n_train = n - n_test;
    Matrix x_train(n_train, d);
    Vector y_train(n_train);
    x_train.topRows(begin) = x.topRows(begin);
    x_train.bottomRows(n - end) = x.bottomRows(n - end);
    y_train.head(begin) = y.head(begin);
    y_train.tail(n - end) = y.tail(n - end);

    const ColumnMoments moments = column_moments(x_train);
    const Matrix xs = standardize_columns(x_train);
    const double y_mean = y_train.mean();
    const Vector yc = y_train.array() - y_mean;
    Matrix gram(d, d);
    gram.setZero();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose(), 1.0 / n_train);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    const Vector rhs = xs.transpose() * yc / static_cast<double>(n_train);

    Matrix x_test = x.middleRows(begin, n_test).rowwise() - moments.mean.transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (moments.sd(j) > 0.0) {
        x_test.col(j) /= moments.sd(j);
      } else {
        x_test.col(j).setZero();
      }
    }
    const Vector y_test = y.segment(begin, n_test);

    Vector beta = Vector::Zero(d);
    Vector penalty(d);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (Eigen::Index j = 0; j < d; ++j) {
        penalty(j) = moments.sd(j) > 0.0 ? grid[g] / moments.sd(j)
                                         : std::numeric_limits<double>::infinity();
      }
      detail::coordinate_descent_gram(gram, rhs, penalty, beta, options.tol, options.max_iter);
      const Vector residual = y_test - (x_test * beta).array().matrix() -
                              Vector::Constant(n_test, y_mean);
      error[g] += residual.squaredNorm() / static_cast<double>(n_test);
    }
  }
  const auto best = std::min_element(error.begin(), error.end()) - error.begin();
  return grid[static_cast<std::size_t>(best)];
}

KnockoffStatistics lcd_statistics(const Matrix& x, const Matrix& x_tilde, const Vector& y,
                                  const LcdOptions& options) {
  if (x.rows() != x_tilde.rows() || x.cols() != x_tilde.cols()) {
    throw ContractViolation("lcd_statistics: X and knockoffs differ in shape");
  }
  if (x.rows() != y.size()) throw ContractViolation("lcd_statistics: response length mismatch");
  const Eigen::Index p = x.cols();
  Matrix joint(x.rows(), 2 * p);
  joint << x, x_tilde;
  const Matrix z = standardize_columns(joint);

  double lambda = 0.0;
  switch (options.rule) {
    case LcdOptions::Rule::kCrossValidated:
      lambda = lasso_cv_lambda(z, y, options.cv_folds, options.cv_grid_size,
                               options.cv_grid_ratio, LassoOptions{options.cv_tol, options.lasso.max_iter});
      break;
    case LcdOptions::Rule::kMaxFraction:
      lambda = options.fraction * lambda_max(z, y);
      break;
    case LcdOptions::Rule::kFixed:
      lambda = options.value;
      break;
  }
  const LassoFit fit = lasso_fit(z, y, lambda, options.lasso);
  KnockoffStatistics out;
  out.lambda = lambda;
  out.fit_converged = fit.converged;
  out.w = fit.coefficients.head(p).cwiseAbs() - fit.coefficients.tail(p).cwiseAbs();
  return out;
}

double knockoff_threshold(const Vector& w, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ContractViolation("knockoff_threshold: q must lie in (0, 1)");
  std::vector<double> candidates;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) != 0.0) candidates.push_back(std::abs(w(j)));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (double t : candidates) {
    const auto negatives = (w.array() <= -t).count();
    const auto positives = (w.array() >= t).count();
    if (positives == 0) continue;
    if (static_cast<double>(1 + negatives) / static_cast<double>(positives) <= q) return t;
  }
  return kInfiniteThreshold;
}

Vector pi_statistics(const Vector& w) {
  const Eigen::Index p = w.size();
  Vector pi = Vector::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (w(j) > 0.0) {
      pi(j) = static_cast<double>(1 + (w.array() <= -w(j)).count()) / static_cast<double>(p);
    }
  }
  return pi;
}

std::vector<std::size_t> bh_select(const Vector& pvalues, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ContractViolation("bh_select: q must lie in (0, 1)");
  const auto p = static_cast<std::size_t>(pvalues.size());
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pvalues(static_cast<Eigen::Index>(a)) < pvalues(static_cast<Eigen::Index>(b));
  });
  std::size_t k_star = 0;
  for (std::size_t k = 1; k <= p; ++k) {
    if (pvalues(static_cast<Eigen::Index>(order[k - 1])) <=
        q * static_cast<double>(k) / static_cast<double>(p)) {
      k_star = k;
    }
  }
  std::vector<std::size_t> selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_star));
  std::sort(selected.begin(), selected.end());
  return selected;
}

SelectionResult knockoff_select(const Vector& w, double q) {
  SelectionResult out;
  out.q = q;
  out.threshold = knockoff_threshold(w, q);
  out.pi = pi_statistics(w);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) >= out.threshold) out.selected.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

double fdp(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& h0) {
  const std::unordered_set<std::size_t> nulls(h0.begin(), h0.end());
  std::size_t false_discoveries = 0;
  for (std::size_t j : selected) false_discoveries += nulls.count(j);
  return static_cast<double>(false_discoveries) /
         static_cast<double>(std::max<std::size_t>(selected.size(), 1));
}

double power(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& h1) {
  if (h1.empty()) throw ContractViolation("power: the non-null set is empty");
  const std::unordered_set<std::size_t> chosen(selected.begin(), selected.end());
  std::size_t hits = 0;
  for (std::size_t j : h1) hits += chosen.count(j);
  return static_cast<double>(hits) / static_cast<double>(h1.size());
}

}  // namespace knockforge
