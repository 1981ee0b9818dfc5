#include "knockforge/nonparametric_knockoffs.hpp"

#include <sstream>

#include "knockforge/errors.hpp"
#include "knockforge/parallel.hpp"
#include "knockforge/random.hpp"

namespace knockforge {

namespace {

constexpr std::size_t kMinRows = 10;
constexpr int kMaxFoldAttempts = 1000;

std::shared_ptr<const Learner> learner_for(const NonparametricOptions& options) {
  if (options.learner) return options.learner;
  return std::make_shared<LassoLearner>(options.lambda_rule);
}

void check_design(const Matrix& x, const char* what, KnockoffPair& pair) {
  if (x.cols() < 2) throw ContractViolation(std::string(what) + ": need at least 2 columns");
  if (x.rows() <= 2) throw ContractViolation(std::string(what) + ": need more than 2 rows");
  if (static_cast<std::size_t>(x.rows()) < kMinRows) {
    std::ostringstream msg;
    msg << what << ": only " << x.rows() << " rows; residual permutation needs at least "
        << kMinRows << " to be meaningful";
    pair.warnings.push_back(msg.str());
  }
  const ColumnMoments moments = column_moments(x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (moments.sd(j) == 0.0) {
      std::ostringstream msg;
      msg << what << ": column v" << (j + 1) << " is constant";
      throw DegenerateInput(msg.str());
    }
  }
}

double population_variance(const Vector& v) {
  if (v.size() == 0) return 0.0;
  return (v.array() - v.mean()).square().mean();
}

// [X_{-j}, extra_{0..m-1}] with its column provenance.
Matrix assemble_design(const Matrix& x, Eigen::Index j, const Matrix& extra, Eigen::Index m,
                       FitContext& context) {
  const Eigen::Index p = x.cols();
  Matrix design(x.rows(), p - 1 + m);
  context.target_column = static_cast<std::size_t>(j);
  context.columns.clear();
  Eigen::Index c = 0;
  for (Eigen::Index l = 0; l < p; ++l) {
    if (l == j) continue;
    design.col(c++) = x.col(l);
    context.columns.push_back({DesignColumn::Source::kOriginal, static_cast<std::size_t>(l)});
  }
  for (Eigen::Index l = 0; l < m; ++l) {
    design.col(c++) = extra.col(l);
    context.columns.push_back({DesignColumn::Source::kKnockoff, static_cast<std::size_t>(l)});
  }
  return design;
}

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

ColumnLog make_log(std::size_t j, const Predictor& predictor, const Vector& residuals) {
  return {j, predictor.penalty(), population_variance(residuals), predictor.converged()};
}

void warn_unconverged(KnockoffPair& pair) {
  for (const ColumnLog& log : pair.generation_log) {
    if (!log.converged) {
      std::ostringstream msg;
      msg << "regression for column v" << (log.column + 1) << " did not converge";
      pair.warnings.push_back(msg.str());
    }
  }
}

}  // namespace

std::string to_string(KnockoffMethod method) {
  switch (method) {
    case KnockoffMethod::kGaussian: return "gaussian";
    case KnockoffMethod::kSequential: return "sequential";
    case KnockoffMethod::kParallel: return "parallel";
    case KnockoffMethod::kCrossfit: return "crossfit";
  }
  return "unknown";
}

KnockoffMethod parse_knockoff_method(const std::string& name) {
  if (name == "gaussian") return KnockoffMethod::kGaussian;
  if (name == "sequential") return KnockoffMethod::kSequential;
  if (name == "parallel") return KnockoffMethod::kParallel;
  if (name == "crossfit") return KnockoffMethod::kCrossfit;
  throw UsageError("unknown knockoff method '" + name +
                   "' (valid: gaussian, sequential, parallel, crossfit)");
}

std::vector<std::size_t> residual_permutation(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return random_permutation(n, rng);
}

Vector permute_residuals(const Vector& eps, std::uint64_t seed) {
  const std::vector<std::size_t> perm = residual_permutation(static_cast<std::size_t>(eps.size()), seed);
  Vector out(eps.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) out(i) = eps(static_cast<Eigen::Index>(perm[i]));
  return out;
}

KnockoffPair sequential_knockoffs(const Matrix& x, std::uint64_t seed,
                                  const NonparametricOptions& options) {
  KnockoffPair pair;
  check_design(x, "sequential_knockoffs", pair);
  const auto learner = learner_for(options);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  pair.x = x;
  pair.x_tilde = Matrix::Zero(n, p);
  pair.fitted = Matrix::Zero(n, p);
  pair.residuals = Matrix::Zero(n, p);
  pair.method = KnockoffMethod::kSequential;
  pair.seed = seed;

  FitContext context;
  for (Eigen::Index j = 0; j < p; ++j) {
    const Matrix design = assemble_design(x, j, pair.x_tilde, j, context);
    const Vector target = x.col(j);
    const auto predictor = learner->fit(design, target, context);
    const Vector fitted = predictor->predict(design);
    const Vector residuals = target - fitted;
    const std::uint64_t column_seed =
        derive_seed(seed, Stream::kResidualPermutation, static_cast<std::uint64_t>(j));
    pair.x_tilde.col(j) = fitted + permute_residuals(residuals, column_seed);
    pair.fitted.col(j) = fitted;
    pair.residuals.col(j) = residuals;
    pair.generation_log.push_back(make_log(static_cast<std::size_t>(j), *predictor, residuals));
  }
  warn_unconverged(pair);
  return pair;
}

KnockoffPair parallel_knockoffs(const Matrix& x, std::uint64_t seed,
                                const NonparametricOptions& options) {
  KnockoffPair pair;
  check_design(x, "parallel_knockoffs", pair);
  const auto learner = learner_for(options);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  pair.x = x;
  pair.fitted = Matrix::Zero(n, p);
  pair.residuals = Matrix::Zero(n, p);
  pair.method = KnockoffMethod::kParallel;
  pair.seed = seed;
  pair.generation_log.resize(static_cast<std::size_t>(p));

  parallel_for(static_cast<std::size_t>(p), options.workers, [&](std::size_t task) {
    const auto j = static_cast<Eigen::Index>(task);
    FitContext context;
    const Matrix design = assemble_design(x, j, Matrix(), 0, context);
    const Vector target = x.col(j);
    const auto predictor = learner->fit(design, target, context);
    const Vector fitted = predictor->predict(design);
    pair.fitted.col(j) = fitted;
    pair.residuals.col(j) = target - fitted;
    pair.generation_log[task] = make_log(task, *predictor, pair.residuals.col(j));
  });

  pair.x_tilde = Matrix(n, p);
  const std::uint64_t shared_seed = derive_seed(seed, Stream::kResidualPermutation, 0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const std::uint64_t column_seed =
        options.shared_permutation
            ? shared_seed
            : derive_seed(seed, Stream::kResidualPermutation, static_cast<std::uint64_t>(j));
    pair.x_tilde.col(j) = pair.fitted.col(j) + permute_residuals(pair.residuals.col(j), column_seed);
  }
  warn_unconverged(pair);
  return pair;
}

namespace detail {

std::vector<int> crossfit_fold_labels(std::size_t n, int folds, std::uint64_t seed, int* attempts) {
  for (int attempt = 0; attempt < kMaxFoldAttempts; ++attempt) {
    Rng rng(derive_seed(seed, Stream::kFoldAssignment, static_cast<std::uint64_t>(attempt)));
    std::vector<int> labels(n);
    std::vector<std::size_t> counts(static_cast<std::size_t>(folds), 0);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(folds)));
      ++counts[static_cast<std::size_t>(labels[i])];
    }
    bool all_nonempty = true;
    for (std::size_t c : counts) all_nonempty = all_nonempty && c > 0;
    if (all_nonempty) {
      if (attempts) *attempts = attempt;
      return labels;
    }
  }
  throw ContractViolation("crossfit: could not draw nonempty folds");
}

}  // namespace detail

KnockoffPair crossfit_knockoffs(const Matrix& x, int folds, std::uint64_t seed,
                                const NonparametricOptions& options) {
  if (folds < 2) throw ContractViolation("crossfit_knockoffs: need at least 2 folds");
  KnockoffPair pair;
  check_design(x, "crossfit_knockoffs", pair);
  if (x.rows() < 2 * folds) throw ContractViolation("crossfit_knockoffs: fewer than 2 rows per fold");
  const auto learner = learner_for(options);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  pair.x = x;
  pair.x_tilde = Matrix::Zero(n, p);
  pair.fitted = Matrix::Zero(n, p);
  pair.residuals = Matrix::Zero(n, p);
  pair.method = KnockoffMethod::kCrossfit;
  pair.seed = seed;
  pair.generation_log.resize(static_cast<std::size_t>(p));

  int redraws = 0;
  const std::vector<int> labels =
      detail::crossfit_fold_labels(static_cast<std::size_t>(n), folds, seed, &redraws);
  if (redraws > 0) {
    std::ostringstream msg;
    msg << "crossfit: fold labels redrawn " << redraws << " time(s) to avoid empty folds";
    pair.warnings.push_back(msg.str());
  }

  std::vector<double> lambda_sum(static_cast<std::size_t>(p), 0.0);
  std::vector<bool> converged(static_cast<std::size_t>(p), true);
  for (int k = 0; k < folds; ++k) {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> held_out;
    for (Eigen::Index i = 0; i < n; ++i) (labels[i] == k ? held_out : train).push_back(i);
    const Matrix x_train = take_rows(x, train);
    const Matrix x_held = take_rows(x, held_out);
    const auto n_train = static_cast<Eigen::Index>(train.size());
    const auto n_held = static_cast<Eigen::Index>(held_out.size());
    // Auxiliary knockoff of the training rows, rebuilt for every fold.
    Matrix x_bar = Matrix::Zero(n_train, p);
    Matrix x_tilde_held = Matrix::Zero(n_held, p);

    FitContext context;
    for (Eigen::Index j = 0; j < p; ++j) {
      const Matrix design_train = assemble_design(x_train, j, x_bar, j, context);
      const auto predictor = learner->fit(design_train, x_train.col(j), context);
      const Matrix design_held = assemble_design(x_held, j, x_tilde_held, j, context);
      const Vector fitted_held = predictor->predict(design_held);
      const Vector pool = x_held.col(j) - fitted_held;
      const Vector fitted_train = predictor->predict(design_train);

      Rng rng(derive_seed(seed, Stream::kCrossfitResidual,
                          static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(p) +
                              static_cast<std::uint64_t>(j)));
      const auto pool_size = static_cast<std::uint64_t>(pool.size());
      for (Eigen::Index i = 0; i < n_train; ++i) {
        x_bar(i, j) = fitted_train(i) + pool(static_cast<Eigen::Index>(rng.below(pool_size)));
      }
      for (Eigen::Index i = 0; i < n_held; ++i) {
        x_tilde_held(i, j) = fitted_held(i) + pool(static_cast<Eigen::Index>(rng.below(pool_size)));
      }
      for (Eigen::Index i = 0; i < n_held; ++i) {
        pair.fitted(held_out[static_cast<std::size_t>(i)], j) = fitted_held(i);
        pair.residuals(held_out[static_cast<std::size_t>(i)], j) = pool(i);
      }
      lambda_sum[static_cast<std::size_t>(j)] += predictor->penalty();
      converged[static_cast<std::size_t>(j)] = converged[static_cast<std::size_t>(j)] && predictor->converged();
    }
    for (Eigen::Index i = 0; i < n_held; ++i) {
      pair.x_tilde.row(held_out[static_cast<std::size_t>(i)]) = x_tilde_held.row(i);
    }
  }

  for (Eigen::Index j = 0; j < p; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    // λ is averaged over the fold regressions.
    pair.generation_log[jj] = {jj, lambda_sum[jj] / folds, population_variance(pair.residuals.col(j)),
                               converged[jj]};
  }
  warn_unconverged(pair);
  return pair;
}

}  // namespace knockforge
