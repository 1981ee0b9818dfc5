#include <gtest/gtest.h>

#include <cmath>

#include "knockforge/errors.hpp"
#include "knockforge/random.hpp"
#include "knockforge/regression.hpp"

namespace kf = knockforge;

namespace {

kf::Matrix gaussian_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  kf::Rng rng(seed);
  kf::Matrix m(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = rng.normal();
  return m;
}

kf::Vector linear_response(const kf::Matrix& x, std::uint64_t seed) {
  kf::Rng rng(seed);
  kf::Vector beta = kf::Vector::Zero(x.cols());
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(5, x.cols()); ++j) beta(j) = (j % 2 ? -1.0 : 1.5);
  kf::Vector y = x * beta;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.5 * rng.normal() + 2.0;
  return y;
}

// Independent closed form of the one-column lasso with intercept.
double univariate_lasso(const kf::Vector& x, const kf::Vector& y, double lambda) {
  const double n = static_cast<double>(x.size());
  const kf::Vector xc = x.array() - x.mean();
  const kf::Vector yc = y.array() - y.mean();
  const double rho = xc.dot(yc) / n;
  const double scale = xc.squaredNorm() / n;
  const double shrunk = std::copysign(std::max(std::abs(rho) - lambda, 0.0), rho);
  return shrunk / scale;
}

}  // namespace

TEST(Lasso, UnivariateMatchesSoftThresholdClosedForm) {
  kf::Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    kf::Matrix x(60, 1);
    kf::Vector y(60);
    const double scale = 0.1 + 3.0 * rng.uniform();
    for (int i = 0; i < 60; ++i) {
      x(i, 0) = scale * rng.normal() + 1.0;
      y(i) = 0.8 * x(i, 0) + rng.normal();
    }
    const double top = kf::lambda_max(x, y);
    for (double frac : {0.0, 0.1, 0.5, 0.9, 1.5}) {
      const double lambda = frac * top;
      const auto fit = kf::lasso_fit(x, y, lambda);
      EXPECT_NEAR(fit.coefficients(0), univariate_lasso(x.col(0), y, lambda), 1e-8);
    }
  }
}

TEST(Lasso, AboveLambdaMaxGivesZero) {
  const kf::Matrix x = gaussian_matrix(50, 30, 1);
  const kf::Vector y = linear_response(x, 2);
  const double top = kf::lambda_max(x, y);
  for (double lambda : {top, 1.01 * top, 10.0 * top}) {
    const auto fit = kf::lasso_fit(x, y, lambda);
    EXPECT_TRUE(fit.coefficients.isZero(0.0));
    EXPECT_NEAR(fit.intercept, y.mean(), 1e-12);
  }
  const auto below = kf::lasso_fit(x, y, 0.9 * top);
  EXPECT_GT(below.coefficients.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lasso, KktHoldsAcrossPenaltiesAndShapes) {
  for (auto [n, p] : {std::pair{100, 20}, std::pair{40, 120}, std::pair{200, 200}}) {
    kf::Matrix x = gaussian_matrix(n, p, n + p);
    for (Eigen::Index j = 0; j < p; ++j) x.col(j) *= 0.2 + 0.1 * static_cast<double>(j % 7);
    const kf::Vector y = linear_response(x, 3);
    const double top = kf::lambda_max(x, y);
    for (double frac : {0.5, 0.1, 0.01}) {
      const auto fit = kf::lasso_fit(x, y, frac * top);
      ASSERT_TRUE(fit.converged);
      EXPECT_LT(kf::lasso_kkt_violation(x, y, fit), 1e-6) << n << "x" << p << " frac " << frac;
    }
  }
}

TEST(Lasso, WideDesignSmallPenalty) {
  kf::Matrix x = gaussian_matrix(30, 300, 11);
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) *= 1.0 + static_cast<double>(j % 3);
  const kf::Vector y = linear_response(x, 12);
  for (double frac : {0.005, 0.001}) {
    const auto fit = kf::lasso_fit(x, y, frac * kf::lambda_max(x, y));
    ASSERT_TRUE(fit.converged);
    EXPECT_LT(kf::lasso_kkt_violation(x, y, fit), 1e-9) << frac;
  }
}

TEST(Lasso, ObjectiveNotBeatenByPerturbation) {
  const kf::Matrix x = gaussian_matrix(80, 10, 8);
  const kf::Vector y = linear_response(x, 9);
  const double lambda = 0.05 * kf::lambda_max(x, y);
  const auto fit = kf::lasso_fit(x, y, lambda);
  const double best = kf::lasso_objective(x, y, fit.coefficients, fit.intercept, lambda);
  kf::Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    kf::Vector b = fit.coefficients;
    b(static_cast<Eigen::Index>(rng.below(10))) += 1e-3 * rng.normal();
    const kf::Vector r = y - x * b;
    EXPECT_GE(kf::lasso_objective(x, y, b, r.mean(), lambda), best - 1e-12);
  }
}

TEST(Lasso, DefaultLambdaIsHundredth) {
  const kf::Matrix x = gaussian_matrix(30, 5, 3);
  const kf::Vector y = linear_response(x, 4);
  EXPECT_DOUBLE_EQ(kf::default_lambda(x, y), kf::lambda_max(x, y) / 100.0);
}

TEST(Lasso, RejectsBadShapes) {
  const kf::Matrix x = gaussian_matrix(10, 3, 1);
  EXPECT_THROW(kf::lasso_fit(x, kf::Vector::Zero(9), 0.1), kf::ContractViolation);
  EXPECT_THROW(kf::lasso_fit(x, kf::Vector::Zero(10), -1.0), kf::ContractViolation);
}

TEST(Lasso, ConstantColumnGetsZeroCoefficient) {
  kf::Matrix x = gaussian_matrix(50, 3, 5);
  x.col(1).setConstant(2.0);
  const kf::Vector y = linear_response(x, 6);
  const auto fit = kf::lasso_fit(x, y, 0.01 * kf::lambda_max(x, y));
  EXPECT_EQ(fit.coefficients(1), 0.0);
  EXPECT_LT(kf::lasso_kkt_violation(x, y, fit), 1e-6);
}

TEST(LassoLearner, FitsWithLambdaRule) {
  const kf::Matrix x = gaussian_matrix(120, 8, 12);
  const kf::Vector y = linear_response(x, 13);
  const kf::LassoLearner learner(kf::lambda_max_fraction(0.01));
  const auto predictor = learner.fit(x, y, {});
  EXPECT_NEAR(predictor->penalty(), 0.01 * kf::lambda_max(x, y), 1e-15);
  EXPECT_TRUE(predictor->converged());
  const auto direct = kf::lasso_fit(x, y, 0.01 * kf::lambda_max(x, y));
  EXPECT_LT((predictor->predict(x) - direct.predict(x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Classifier, SeparatesShiftedClouds) {
  kf::Rng rng(21);
  kf::Matrix z(400, 3);
  std::vector<int> labels(400);
  for (int i = 0; i < 400; ++i) {
    labels[i] = i % 2;
    for (int j = 0; j < 3; ++j) z(i, j) = rng.normal() + (labels[i] ? 3.0 : 0.0);
  }
  const auto fit = kf::classifier_fit(z, labels, 1.0);
  EXPECT_TRUE(fit.converged);
  const auto predicted = kf::classifier_predict(fit, z);
  int correct = 0;
  for (int i = 0; i < 400; ++i) correct += predicted[i] == labels[i];
  EXPECT_GT(correct, 380);
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
    EXPECT_LE(fit.objective_trace[k], fit.objective_trace[k - 1] + 1e-12);
  }
}

TEST(Classifier, GradientVanishesAtOptimum) {
  kf::Rng rng(22);
  const int n = 150;
  kf::Matrix z(n, 2);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    z(i, 1) = rng.normal();
    labels[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-z(i, 0))) ? 1 : 0;
  }
  const double l2 = 1.0;
  const auto fit = kf::classifier_fit(z, labels, l2);
  // Finite-difference check of the objective stationarity in the bias.
  const kf::Vector scores = kf::classifier_scores(fit, z);
  double grad_bias = 0.0;
  for (int i = 0; i < n; ++i) grad_bias += 1.0 / (1.0 + std::exp(-scores(i))) - labels[i];
  EXPECT_NEAR(grad_bias, 0.0, 1e-6);
}
