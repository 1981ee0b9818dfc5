#include <gtest/gtest.h>

#include <cmath>

#include "knockforge/covariance.hpp"
#include "knockforge/errors.hpp"
#include "knockforge/random.hpp"

namespace kf = knockforge;

namespace {

kf::Matrix correlated_sample(Eigen::Index n, const kf::Matrix& sigma, std::uint64_t seed) {
  const kf::Matrix l = Eigen::LLT<kf::Matrix>(sigma).matrixL();
  kf::Rng rng(seed);
  kf::Matrix z(n, sigma.rows());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < sigma.rows(); ++j) z(i, j) = rng.normal();
  return z * l.transpose();
}

kf::Matrix ar1(Eigen::Index p, double rho) {
  kf::Matrix s(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, std::abs(static_cast<double>(i - j)));
  return s;
}

double smallest_eigenvalue(const kf::Matrix& m) {
  return Eigen::SelfAdjointEigenSolver<kf::Matrix>(m).eigenvalues().minCoeff();
}

// Ledoit-Wolf intensity written out entry by entry from the original
// estimator: normalized Frobenius norms, per-observation dispersion b̄².
double reference_lw_intensity(const kf::Matrix& x) {
  const auto n = x.rows();
  const auto p = x.cols();
  kf::Vector mean = x.colwise().mean();
  kf::Matrix s = kf::Matrix::Zero(p, p);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j) s(i, j) += (x(k, i) - mean(i)) * (x(k, j) - mean(j));
  }
  s /= static_cast<double>(n);
  double m = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) m += s(i, i);
  m /= static_cast<double>(p);
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      const double e = s(i, j) - (i == j ? m : 0.0);
      d2 += e * e;
    }
  d2 /= static_cast<double>(p);
  double b2 = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j) {
        const double e = (x(k, i) - mean(i)) * (x(k, j) - mean(j)) - s(i, j);
        acc += e * e;
      }
    b2 += acc / static_cast<double>(p);
  }
  b2 /= static_cast<double>(n) * static_cast<double>(n);
  b2 = std::min(b2, d2);
  return d2 > 0 ? b2 / d2 : 0.0;
}

}  // namespace

TEST(Empirical, IdenticalRowsGiveZero) {
  kf::Matrix x(2, 3);
  x << 1, 2, 3, 1, 2, 3;
  EXPECT_TRUE(kf::empirical_covariance(x).sigma.isZero(0.0));
}

TEST(Empirical, PerfectlyCorrelatedLine) {
  kf::Matrix x(5, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4, 7, 7;
  const auto est = kf::empirical_covariance(x);
  EXPECT_DOUBLE_EQ(est.sigma(0, 0), est.sigma(0, 1));
  EXPECT_DOUBLE_EQ(est.sigma(1, 1), est.sigma(1, 0));
  EXPECT_NEAR(est.min_eigenvalue, 0.0, 1e-12);
}

TEST(Empirical, MonteCarloConcentration) {
  kf::Matrix truth(2, 2);
  truth << 1, 0.5, 0.5, 1;
  const auto est = kf::empirical_covariance(correlated_sample(10000, truth, 0));
  EXPECT_LT((est.sigma - truth).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Empirical, NeedsTwoRows) {
  EXPECT_THROW(kf::empirical_covariance(kf::Matrix::Ones(1, 3)), kf::ContractViolation);
}

TEST(Estimates, SymmetricWithIndependentMinEigenvalue) {
  const kf::Matrix x = correlated_sample(40, ar1(12, 0.6), 3);
  for (const auto& est : {kf::empirical_covariance(x), kf::ledoit_wolf(x),
                          kf::graphical_lasso(x, 0.1).estimate}) {
    EXPECT_LT((est.sigma - est.sigma.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(est.min_eigenvalue, smallest_eigenvalue(est.sigma), 1e-8);
  }
}

TEST(LedoitWolf, MatchesIndependentIntensity) {
  const kf::Matrix x = correlated_sample(30, ar1(8, 0.5), 0);
  const auto est = kf::ledoit_wolf(x);
  EXPECT_NEAR(est.shrinkage_or_penalty, reference_lw_intensity(x), 1e-12);
  EXPECT_GE(est.shrinkage_or_penalty, 0.0);
  EXPECT_LE(est.shrinkage_or_penalty, 1.0);
}

TEST(LedoitWolf, ScaledIdentityIsFixedPoint) {
  // Rows ±e_j·√p give S = I exactly; shrinking toward tr(S)/p·I changes nothing.
  const Eigen::Index p = 4;
  kf::Matrix x = kf::Matrix::Zero(2 * p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    x(2 * j, j) = 2.0;
    x(2 * j + 1, j) = -2.0;
  }
  const auto est = kf::ledoit_wolf(x);
  EXPECT_LT((est.sigma - kf::empirical_covariance(x).sigma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LedoitWolf, ShrinksOffDiagonalWhenWide) {
  const kf::Matrix x = correlated_sample(10, kf::Matrix::Identity(50, 50), 9);
  const auto emp = kf::empirical_covariance(x).sigma;
  const auto lw = kf::ledoit_wolf(x);
  kf::Matrix emp_off = emp, lw_off = lw.sigma;
  emp_off.diagonal().setZero();
  lw_off.diagonal().setZero();
  EXPECT_LT(lw_off.cwiseAbs().sum(), emp_off.cwiseAbs().sum());
  EXPECT_GT(lw.min_eigenvalue, 0.0);
}

TEST(LedoitWolf, ConstantDataIsDegenerate) {
  EXPECT_THROW(kf::ledoit_wolf(kf::Matrix::Constant(5, 3, 2.0)), kf::DegenerateInput);
}

TEST(GraphicalLasso, TwoByTwoClosedForm) {
  kf::Rng rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    kf::Matrix s(2, 2);
    const double a = 0.5 + rng.uniform(), b = 0.5 + rng.uniform();
    const double r = 1.8 * rng.uniform() - 0.9;
    s << a, r * std::sqrt(a * b), r * std::sqrt(a * b), b;
    for (double alpha : {0.01, 0.1, 0.3}) {
      const auto fit = kf::graphical_lasso_from_covariance(s, alpha);
      const double w12 = std::copysign(std::max(std::abs(s(0, 1)) - alpha, 0.0), s(0, 1));
      const double theta12 = -w12 / (a * b - w12 * w12);
      EXPECT_NEAR(fit.precision(0, 1), theta12, 1e-4);
      EXPECT_NEAR(fit.estimate.sigma(0, 1), w12, 1e-4);
    }
  }
}

TEST(GraphicalLasso, LargePenaltyIsDiagonal) {
  const kf::Matrix x = correlated_sample(100, ar1(6, 0.7), 2);
  const auto fit = kf::graphical_lasso(x, 1e3);
  const kf::Matrix emp = kf::empirical_covariance(x).sigma;
  kf::Matrix off = fit.estimate.sigma;
  off.diagonal().setZero();
  EXPECT_TRUE(off.isZero(1e-12));
  EXPECT_LT((fit.estimate.sigma.diagonal() - emp.diagonal()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GraphicalLasso, VanishingPenaltyApproachesEmpirical) {
  const kf::Matrix x = correlated_sample(5000, ar1(5, 0.5), 4);
  const auto fit = kf::graphical_lasso(x, 1e-5);
  EXPECT_LT((fit.estimate.sigma - kf::empirical_covariance(x).sigma).cwiseAbs().maxCoeff(), 0.01);
  EXPECT_TRUE(fit.converged);
}

TEST(GraphicalLasso, SparsityGrowsWithPenalty) {
  const kf::Matrix x = correlated_sample(200, ar1(15, 0.5), 5);
  auto zeros = [&](double alpha) {
    const auto fit = kf::graphical_lasso(x, alpha);
    return (fit.precision.array().abs() < 1e-10).count();
  };
  const auto z1 = zeros(0.02), z2 = zeros(0.1), z3 = zeros(0.3);
  EXPECT_LE(z1, z2);
  EXPECT_LE(z2, z3);
  EXPECT_GT(z3, z1);
}

TEST(GraphicalLasso, ObjectiveNonIncreasing) {
  const kf::Matrix x = correlated_sample(150, ar1(20, 0.6), 6);
  const auto fit = kf::graphical_lasso(x, 0.05);
  ASSERT_GE(fit.objectives.size(), 2u);
  for (std::size_t k = 2; k < fit.objectives.size(); ++k) {
    EXPECT_LE(fit.objectives[k], fit.objectives[k - 1] + 1e-8 * std::abs(fit.objectives[k - 1]));
  }
  EXPECT_GT(fit.estimate.min_eigenvalue, 0.0);
}

TEST(GraphicalLasso, RejectsNonPositivePenalty) {
  const kf::Matrix x = correlated_sample(20, ar1(3, 0.2), 1);
  EXPECT_THROW(kf::graphical_lasso(x, 0.0), kf::ContractViolation);
  EXPECT_THROW(kf::graphical_lasso(x, -1.0), kf::ContractViolation);
}

TEST(AlphaSelect, SingletonGrid) {
  const kf::Matrix x = correlated_sample(30, ar1(4, 0.3), 1);
  EXPECT_EQ(kf::alpha_grid_select(x, {0.123}, 3, 0), 0.123);
}

TEST(AlphaSelect, DominatedDiagonalModelLoses) {
  const kf::Matrix x = correlated_sample(300, ar1(6, 0.7), 2);
  EXPECT_EQ(kf::alpha_grid_select(x, {1e6, 0.01}, 3, 0), 0.01);
}

TEST(AlphaSelect, EmptyGridRejected) {
  const kf::Matrix x = correlated_sample(30, ar1(4, 0.3), 1);
  EXPECT_THROW(kf::alpha_grid_select(x, {}, 3, 0), kf::ContractViolation);
}

TEST(AlphaSelect, MatchesBruteForceFoldLikelihood) {
  const kf::Matrix x = correlated_sample(90, ar1(8, 0.6), 7);
  const std::vector<double> grid = {0.01, 0.05, 0.1, 0.3};
  const int folds = 3;
  const std::uint64_t seed = 17;
  const auto labels = kf::fold_labels(90, folds, seed);
  kf::GraphicalLassoOptions options{kf::kSelectionGlassoTol, 100, 1e-5};
  std::vector<double> scores(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (int k = 0; k < folds; ++k) {
      std::vector<Eigen::Index> train, test;
      for (Eigen::Index i = 0; i < 90; ++i) (labels[i] == k ? test : train).push_back(i);
      const kf::Matrix xtr = x(train, Eigen::all);
      const kf::Matrix xte = x(test, Eigen::all);
      const auto fit = kf::graphical_lasso(xtr, grid[g], options);
      const kf::Matrix ste = kf::empirical_covariance(xte).sigma;
      const double logdet = std::log(fit.precision.determinant());
      scores[g] += logdet - (ste * fit.precision).trace();
    }
  }
  const auto computed = kf::alpha_grid_scores(x, grid, folds, seed, 1, options);
  for (std::size_t g = 0; g < grid.size(); ++g) EXPECT_NEAR(computed[g], scores[g], 1e-8);
  const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
  EXPECT_EQ(kf::alpha_grid_select(x, grid, folds, seed), grid[best]);
  EXPECT_EQ(kf::alpha_grid_select(x, grid, folds, seed, 3), grid[best]);
}

TEST(FoldLabels, BalancedAndDeterministic) {
  const auto a = kf::fold_labels(100, 3, 5);
  EXPECT_EQ(a, kf::fold_labels(100, 3, 5));
  std::vector<int> counts(3, 0);
  for (int l : a) ++counts[l];
  EXPECT_EQ(counts[0], 34);
  EXPECT_EQ(counts[1], 33);
  EXPECT_EQ(counts[2], 33);
}

TEST(AssertPsd, IdentityUntouched) {
  const auto r = kf::assert_psd(kf::Matrix::Identity(4, 4), 1e-3);
  EXPECT_EQ(r.jitter, 0.0);
  EXPECT_TRUE(r.matrix.isIdentity(0.0));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(AssertPsd, SmallNegativeEigenvalueShifted) {
  kf::Matrix m(2, 2);
  m << 1, 0, 0, -0.001;
  const auto r = kf::assert_psd(m, 0.01);
  EXPECT_GE(smallest_eigenvalue(r.matrix), 0.0);
  EXPECT_GT(r.jitter, 0.0);
  EXPECT_LE(r.jitter, 0.01);
  EXPECT_NEAR(r.matrix(0, 0), 1.0 + r.jitter, 1e-15);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(AssertPsd, RandomIndefiniteRepairedWithinBudget) {
  kf::Rng rng(0);
  kf::Matrix a(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) a(i, j) = rng.normal();
  const kf::Matrix m = (a + a.transpose()) / 2.0;
  const double lmin = smallest_eigenvalue(m);
  ASSERT_LT(lmin, 0.0);
  const auto r = kf::assert_psd(m, -lmin * 2.0);
  EXPECT_GE(smallest_eigenvalue(r.matrix), 0.0);
  EXPECT_THROW(kf::assert_psd(m, -lmin / 2.0), kf::NonPsdError);
}

TEST(EstimateCovariance, DispatchAndOracle) {
  const kf::Matrix sigma = ar1(5, 0.4);
  const kf::Matrix x = correlated_sample(80, sigma, 8);
  kf::CovarianceOptions options;
  options.method = kf::CovarianceMethod::kOracle;
  EXPECT_THROW(kf::estimate_covariance(x, options), kf::ContractViolation);
  options.oracle = sigma;
  EXPECT_EQ(kf::estimate_covariance(x, options).sigma, sigma);
  options.method = kf::CovarianceMethod::kLedoitWolf;
  EXPECT_EQ(kf::estimate_covariance(x, options).sigma, kf::ledoit_wolf(x).sigma);
  options.method = kf::CovarianceMethod::kGraphicalLasso;
  const auto glasso = kf::estimate_covariance(x, options);
  EXPECT_EQ(glasso.method, kf::CovarianceMethod::kGraphicalLasso);
  EXPECT_GT(glasso.min_eigenvalue, 0.0);
  EXPECT_LT((glasso.sigma.diagonal() - kf::empirical_covariance(x).sigma.diagonal()).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(EstimateCovariance, RowPermutationInvariant) {
  const kf::Matrix x = correlated_sample(60, ar1(6, 0.5), 10);
  kf::Matrix reversed = x.colwise().reverse();
  for (auto method : {kf::CovarianceMethod::kEmpirical, kf::CovarianceMethod::kLedoitWolf}) {
    kf::CovarianceOptions options;
    options.method = method;
    EXPECT_LT((kf::estimate_covariance(x, options).sigma - kf::estimate_covariance(reversed, options).sigma)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
}

TEST(ParseCovariance, NamesAndUnknown) {
  EXPECT_EQ(kf::parse_covariance_method("lw"), kf::CovarianceMethod::kLedoitWolf);
  EXPECT_EQ(kf::parse_covariance_method("glasso"), kf::CovarianceMethod::kGraphicalLasso);
  EXPECT_EQ(kf::parse_covariance_method("empirical"), kf::CovarianceMethod::kEmpirical);
  EXPECT_EQ(kf::parse_covariance_method("oracle"), kf::CovarianceMethod::kOracle);
  EXPECT_THROW(kf::parse_covariance_method("shrunk"), kf::UsageError);
}
