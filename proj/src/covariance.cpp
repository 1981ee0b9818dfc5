#include "knockforge/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "knockforge/errors.hpp"
#include "knockforge/parallel.hpp"
#include "knockforge/random.hpp"
#include "knockforge/regression.hpp"

namespace knockforge {

namespace {

Matrix centered(const Matrix& x) { return x.rowwise() - x.colwise().mean(); }

Matrix empirical_matrix(const Matrix& x) {
  const Matrix xc = centered(x);
  return symmetrize(xc.transpose() * xc / static_cast<double>(x.rows()));
}

double max_off_diagonal(const Matrix& s) {
  double m = 0.0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      if (i != j) m = std::max(m, std::abs(s(i, j)));
    }
  }
  return m;
}

double duality_gap(const Matrix& s, const Matrix& precision, double alpha) {
  const double p = static_cast<double>(s.rows());
  const double off = precision.cwiseAbs().sum() - precision.diagonal().cwiseAbs().sum();
  return (s.cwiseProduct(precision)).sum() - p + alpha * off;
}

double penalized_objective(const Matrix& s, const Matrix& precision, double alpha) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double off = precision.cwiseAbs().sum() - precision.diagonal().cwiseAbs().sum();
  return -logdet + (s.cwiseProduct(precision)).sum() + alpha * off;
}

// Matrix with row/column `skip` removed.
Matrix drop_index(const Matrix& m, Eigen::Index skip) {
  const Eigen::Index p = m.rows();
  Matrix out(p - 1, p - 1);
  for (Eigen::Index j = 0, oj = 0; j < p; ++j) {
    if (j == skip) continue;
    for (Eigen::Index i = 0, oi = 0; i < p; ++i) {
      if (i == skip) continue;
      out(oi++, oj) = m(i, j);
    }
    ++oj;
  }
  return out;
}

Vector drop_entry(const Vector& v, Eigen::Index skip) {
  Vector out(v.size() - 1);
  for (Eigen::Index i = 0, o = 0; i < v.size(); ++i) {
    if (i != skip) out(o++) = v(i);
  }
  return out;
}

void check_rows(const Matrix& x, const char* what) {
  if (x.rows() < 2) throw ContractViolation(std::string(what) + ": need at least 2 rows");
  if (x.cols() < 1) throw ContractViolation(std::string(what) + ": need at least 1 column");
}

}  // namespace

std::string to_string(CovarianceMethod method) {
  switch (method) {
    case CovarianceMethod::kEmpirical: return "empirical";
    case CovarianceMethod::kLedoitWolf: return "lw";
    case CovarianceMethod::kGraphicalLasso: return "glasso";
    case CovarianceMethod::kOracle: return "oracle";
  }
  return "unknown";
}

CovarianceEstimate oracle_estimate(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw ContractViolation("oracle covariance must be square");
  CovarianceEstimate est;
  est.sigma = symmetrize(sigma);
  est.method = CovarianceMethod::kOracle;
  est.min_eigenvalue = min_eigenvalue(est.sigma);
  return est;
}

CovarianceEstimate empirical_covariance(const Matrix& x) {
  check_rows(x, "empirical_covariance");
  CovarianceEstimate est;
  est.sigma = empirical_matrix(x);
  est.method = CovarianceMethod::kEmpirical;
  est.min_eigenvalue = min_eigenvalue(est.sigma);
  return est;
}

CovarianceEstimate ledoit_wolf(const Matrix& x) {
  check_rows(x, "ledoit_wolf");
  const double n = static_cast<double>(x.rows());
  const double p = static_cast<double>(x.cols());
  const Matrix xc = centered(x);
  const Matrix s = symmetrize(xc.transpose() * xc / n);
  const double trace = s.trace();
  if (!(trace > 0.0)) throw DegenerateInput("ledoit_wolf: data has zero total variance");
  const double mu = trace / p;

  // Sum over rows of ‖x_i‖⁴, and ‖S‖²_F.
  const double fourth = xc.rowwise().squaredNorm().squaredNorm();
  const double s_frob = s.squaredNorm();
  double beta = (fourth / n - s_frob) / (n * p);
  const double delta = (s_frob - 2.0 * mu * trace + p * mu * mu) / p;
  beta = std::min(beta, delta);
  const double shrinkage = (beta <= 0.0 || delta <= 0.0) ? 0.0 : beta / delta;

  CovarianceEstimate est;
  est.sigma = (1.0 - shrinkage) * s;
  est.sigma.diagonal().array() += shrinkage * mu;
  est.sigma = symmetrize(est.sigma);
  est.method = CovarianceMethod::kLedoitWolf;
  est.shrinkage_or_penalty = shrinkage;
  est.min_eigenvalue = min_eigenvalue(est.sigma);
  return est;
}

GraphicalLassoFit graphical_lasso(const Matrix& x, double alpha,
                                  const GraphicalLassoOptions& options) {
  check_rows(x, "graphical_lasso");
  return graphical_lasso_from_covariance(empirical_matrix(x), alpha, options);
}

GraphicalLassoFit graphical_lasso_from_covariance(const Matrix& emp, double alpha,
                                                  const GraphicalLassoOptions& options) {
  if (!(alpha > 0.0)) throw ContractViolation("graphical_lasso: alpha must be positive");
  if (emp.rows() != emp.cols() || emp.rows() == 0) {
    throw ContractViolation("graphical_lasso: covariance must be square and nonempty");
  }
  const Eigen::Index p = emp.rows();
  GraphicalLassoFit fit;

  Matrix cov = 0.95 * emp;
  cov.diagonal() = emp.diagonal();
  if ((emp.diagonal().array() <= 0.0).any()) {
    throw DegenerateInput("graphical_lasso: a column has zero variance");
  }
  Matrix precision;
  {
    Eigen::LDLT<Matrix> ldlt(cov);
    precision = ldlt.solve(Matrix::Identity(p, p));
  }

  if (p == 1) {
    precision(0, 0) = 1.0 / emp(0, 0);
    fit.converged = true;
  }
  const Vector penalty = Vector::Constant(std::max<Eigen::Index>(p - 1, 0), alpha);
  for (int iter = 0; iter < options.max_iter && p > 1; ++iter) {
    for (Eigen::Index idx = 0; idx < p; ++idx) {
      const Matrix sub = drop_index(cov, idx);
      const Vector row = drop_entry(emp.col(idx), idx);
      Vector coefs = -drop_entry(precision.col(idx), idx) /
                     (precision(idx, idx) + 1000.0 * std::numeric_limits<double>::epsilon());
      detail::coordinate_descent_gram(sub, row, penalty, coefs, options.inner_tol,
                                      options.inner_max_iter);
      const Vector cov_col = drop_entry(cov.col(idx), idx);
      const double diag = 1.0 / (cov(idx, idx) - cov_col.dot(coefs));
      if (!(diag > 0.0) || !std::isfinite(diag)) {
        throw NumericalFailure("graphical_lasso: iterate lost positive definiteness (alpha=" +
                               std::to_string(alpha) + ")");
      }
      const Vector new_cov = sub * coefs;
      precision(idx, idx) = diag;
      for (Eigen::Index i = 0, o = 0; i < p; ++i) {
        if (i == idx) continue;
        precision(i, idx) = -diag * coefs(o);
        precision(idx, i) = -diag * coefs(o);
        cov(i, idx) = new_cov(o);
        cov(idx, i) = new_cov(o);
        ++o;
      }
    }
    const double gap = duality_gap(emp, precision, alpha);
    fit.duality_gaps.push_back(gap);
    fit.objectives.push_back(penalized_objective(emp, precision, alpha));
    fit.n_iterations = iter + 1;
    if (!std::isfinite(gap)) {
      throw NumericalFailure("graphical_lasso: non-finite duality gap (alpha=" +
                             std::to_string(alpha) + ")");
    }
    if (std::abs(gap) < options.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.estimate.sigma = symmetrize(cov);
  fit.estimate.method = CovarianceMethod::kGraphicalLasso;
  fit.estimate.shrinkage_or_penalty = alpha;
  fit.estimate.min_eigenvalue = min_eigenvalue(fit.estimate.sigma);
  fit.precision = symmetrize(precision);
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "graphical_lasso: no convergence after " << fit.n_iterations
        << " iterations (alpha=" << alpha << ", gap="
        << (fit.duality_gaps.empty() ? 0.0 : fit.duality_gaps.back()) << ")";
    fit.estimate.warnings.push_back(msg.str());
  }
  if (!(fit.estimate.min_eigenvalue > 0.0)) {
    throw NumericalFailure("graphical_lasso: estimate is not positive definite (alpha=" +
                           std::to_string(alpha) + ")");
  }
  return fit;
}

std::vector<double> default_alpha_grid(const Matrix& x, const std::vector<double>& factors) {
  check_rows(x, "default_alpha_grid");
  const double scale = max_off_diagonal(empirical_matrix(standardize_columns(x)));
  std::vector<double> grid;
  for (double factor : factors) grid.push_back(factor * scale);
  return grid;
}

std::vector<int> fold_labels(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ContractViolation("folds must be at least 2");
  Rng rng(derive_seed(seed, Stream::kFoldAssignment));
  const auto perm = random_permutation(n, rng);
  std::vector<int> labels(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    labels[perm[rank]] = static_cast<int>(rank % static_cast<std::size_t>(folds));
  }
  return labels;
}

std::vector<double> alpha_grid_scores(const Matrix& x, const std::vector<double>& grid,
                                      int folds, std::uint64_t seed, std::size_t workers,
                                      const GraphicalLassoOptions& options) {
  if (grid.empty()) throw ContractViolation("alpha_grid_select: empty grid");
  check_rows(x, "alpha_grid_select");
  if (static_cast<Eigen::Index>(folds) * 2 > x.rows()) {
    throw ContractViolation("alpha_grid_select: need at least 2 rows per fold");
  }
  const auto labels = fold_labels(static_cast<std::size_t>(x.rows()), folds, seed);
  std::vector<Matrix> train_cov(static_cast<std::size_t>(folds));
  std::vector<Matrix> test_cov(static_cast<std::size_t>(folds));
  for (int k = 0; k < folds; ++k) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      (labels[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    }
    train_cov[static_cast<std::size_t>(k)] = empirical_matrix(x(train, Eigen::all));
    test_cov[static_cast<std::size_t>(k)] = empirical_matrix(x(test, Eigen::all));
  }

  const std::size_t g_count = grid.size();
  const std::size_t tasks = g_count * static_cast<std::size_t>(folds);
  std::vector<double> fold_scores(tasks, 0.0);
  parallel_for(tasks, workers, [&](std::size_t t) {
    const std::size_t k = t / g_count;
    const std::size_t g = t % g_count;
    try {
      const auto fit = graphical_lasso_from_covariance(train_cov[k], grid[g], options);
      Eigen::LLT<Matrix> llt(fit.precision);
      if (llt.info() != Eigen::Success) {
        fold_scores[t] = -std::numeric_limits<double>::infinity();
        return;
      }
      const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      fold_scores[t] = logdet - test_cov[k].cwiseProduct(fit.precision).sum();
    } catch (const NumericalFailure&) {
      fold_scores[t] = -std::numeric_limits<double>::infinity();
    }
  });
  std::vector<double> scores(g_count, 0.0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(folds); ++k) {
    for (std::size_t g = 0; g < g_count; ++g) scores[g] += fold_scores[k * g_count + g];
  }
  return scores;
}

double alpha_grid_select(const Matrix& x, const std::vector<double>& grid, int folds,
                         std::uint64_t seed, std::size_t workers) {
  if (grid.empty()) throw ContractViolation("alpha_grid_select: empty grid");
  if (grid.size() == 1) return grid.front();
  const auto scores = alpha_grid_scores(x, grid, folds, seed, workers);
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (scores[g] > scores[best]) best = g;
  }
  if (!std::isfinite(scores[best])) {
    throw NumericalFailure("alpha_grid_select: graphical lasso failed for every grid value");
  }
  return grid[best];
}

PsdRepair assert_psd(const Matrix& sigma, double jitter_max, double floor) {
  if (sigma.rows() != sigma.cols()) throw ContractViolation("assert_psd: matrix must be square");
  PsdRepair out;
  out.matrix = sigma;
  const double lmin = min_eigenvalue(sigma);
  if (lmin >= floor) return out;
  const double scale = std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff());
  const double jitter = (floor - lmin) + 1e-12 * scale;
  if (jitter > jitter_max) {
    std::ostringstream msg;
    msg << "matrix is not positive semidefinite: min eigenvalue " << lmin
        << " needs jitter " << jitter << " > budget " << jitter_max;
    throw NonPsdError(msg.str(), lmin);
  }
  out.matrix.diagonal().array() += jitter;
  out.jitter = jitter;
  std::ostringstream msg;
  msg << "assert_psd: added jitter " << jitter << " (min eigenvalue was " << lmin << ")";
  out.warnings.push_back(msg.str());
  return out;
}

CovarianceEstimate estimate_covariance(const Matrix& x, const CovarianceOptions& options) {
  switch (options.method) {
    case CovarianceMethod::kEmpirical: return empirical_covariance(x);
    case CovarianceMethod::kLedoitWolf: return ledoit_wolf(x);
    case CovarianceMethod::kOracle:
      if (options.oracle.rows() != x.cols() || options.oracle.cols() != x.cols()) {
        throw ContractViolation("estimate_covariance: oracle covariance does not match the design");
      }
      return oracle_estimate(options.oracle);
    case CovarianceMethod::kGraphicalLasso: break;
  }
  check_rows(x, "estimate_covariance");
  const ColumnMoments moments = column_moments(x);
  if ((moments.sd.array() <= 0.0).any()) {
    throw DegenerateInput("estimate_covariance: a column has zero variance");
  }
  const Matrix z = options.correlation_scale ? standardize_columns(x) : x;
  double alpha = 0.0;
  if (options.alpha) {
    alpha = *options.alpha;
  } else {
    alpha = alpha_grid_select(z, default_alpha_grid(z, options.alpha_factors), options.alpha_folds,
                              options.seed, options.workers);
  }
  GraphicalLassoFit fit = graphical_lasso(z, alpha, options.glasso);
  CovarianceEstimate est = std::move(fit.estimate);
  if (options.correlation_scale) {
    est.sigma = symmetrize(moments.sd.asDiagonal() * est.sigma * moments.sd.asDiagonal());
    est.min_eigenvalue = min_eigenvalue(est.sigma);
  }
  return est;
}

CovarianceMethod parse_covariance_method(const std::string& name) {
  if (name == "empirical") return CovarianceMethod::kEmpirical;
  if (name == "lw") return CovarianceMethod::kLedoitWolf;
  if (name == "glasso") return CovarianceMethod::kGraphicalLasso;
  if (name == "oracle") return CovarianceMethod::kOracle;
  throw UsageError("unknown covariance method '" + name + "' (valid: empirical, lw, glasso, oracle)");
}

}  // namespace knockforge
