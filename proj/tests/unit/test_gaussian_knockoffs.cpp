#include <gtest/gtest.h>

#include <cmath>

#include "knockforge/errors.hpp"
#include "knockforge/gaussian_knockoffs.hpp"
#include "knockforge/random.hpp"

namespace kf = knockforge;

namespace {

kf::Matrix bivariate(double rho) {
  kf::Matrix s(2, 2);
  s << 1, rho, rho, 1;
  return s;
}

kf::Matrix sample(Eigen::Index n, const kf::Matrix& sigma, std::uint64_t seed) {
  const kf::Matrix l = Eigen::LLT<kf::Matrix>(sigma).matrixL();
  kf::Rng rng(seed);
  kf::Matrix z(n, sigma.rows());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < sigma.rows(); ++j) z(i, j) = rng.normal();
  return z * l.transpose();
}

kf::Matrix joint_empirical(const kf::Matrix& x, const kf::Matrix& xt) {
  kf::Matrix j(x.rows(), 2 * x.cols());
  j << x, xt;
  const kf::Matrix c = j.rowwise() - j.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows());
}

}  // namespace

TEST(EquicorrelatedS, IdentityGivesOne) {
  const auto s = kf::equicorrelated_s(kf::oracle_estimate(kf::Matrix::Identity(5, 5)));
  EXPECT_TRUE(s.isApprox(kf::Vector::Ones(5)));
}

TEST(EquicorrelatedS, TwoByTwoEigenvalues) {
  EXPECT_NEAR(kf::equicorrelated_s(kf::oracle_estimate(bivariate(0.5)))(0), 1.0, 1e-12);
  const auto s = kf::equicorrelated_s(kf::oracle_estimate(bivariate(0.9)));
  EXPECT_NEAR(s(0), 0.2, 1e-12);
  EXPECT_NEAR(s(1), 0.2, 1e-12);
}

TEST(EquicorrelatedS, SingularSigmaClampedAwayFromZero) {
  const auto s = kf::equicorrelated_s(kf::oracle_estimate(kf::Matrix::Ones(3, 3)));
  EXPECT_GT(s(0), 0.0);
  EXPECT_LE(s(0), 1e-9);
}

TEST(EquicorrelatedS, NonPsdRejected) {
  EXPECT_THROW(kf::equicorrelated_s(kf::oracle_estimate(bivariate(1.5))), kf::ContractViolation);
}

TEST(BuildSampler, IdentityReducesToFreshNormals) {
  const auto sampler = kf::build_sampler(kf::oracle_estimate(kf::Matrix::Identity(3, 3)));
  EXPECT_TRUE(sampler.mean_map.isIdentity(1e-12));
  EXPECT_TRUE(sampler.conditional_cov.isIdentity(1e-12));
}

TEST(BuildSampler, TwoByTwoHandAlgebra) {
  const auto sampler = kf::build_sampler(kf::oracle_estimate(bivariate(0.5)));
  kf::Matrix inv(2, 2);
  inv << 1, -0.5, -0.5, 1;
  inv /= 0.75;
  const kf::Matrix v = 2.0 * kf::Matrix::Identity(2, 2) - inv;
  EXPECT_LT((sampler.conditional_cov - v).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((sampler.sigma_inv - inv).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BuildSampler, CholeskyRoundTrip) {
  kf::Matrix sigma(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sigma(i, j) = std::pow(0.6, std::abs(i - j));
  const auto sampler = kf::build_sampler(kf::oracle_estimate(sigma));
  const kf::Matrix& l = sampler.conditional_cov_cholesky;
  EXPECT_TRUE(l.isLowerTriangular(0.0));
  EXPECT_LT((l * l.transpose() - sampler.conditional_cov).cwiseAbs().maxCoeff(), 1e-10);
  const kf::Matrix g = kf::joint_covariance(sampler);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<kf::Matrix>(g).eigenvalues().minCoeff(), -1e-10);
}

TEST(SampleKnockoffs, IdentityDecorrelates) {
  const auto sampler = kf::build_sampler(kf::oracle_estimate(kf::Matrix::Identity(2, 2)));
  const kf::Matrix x = sample(100000, kf::Matrix::Identity(2, 2), 1);
  const kf::Matrix xt = kf::sample_knockoffs(sampler, x, 2);
  const kf::Matrix c = joint_empirical(x, xt);
  EXPECT_NEAR(c(0, 2) / std::sqrt(c(0, 0) * c(2, 2)), 0.0, 0.02);
  EXPECT_NEAR(c(1, 3) / std::sqrt(c(1, 1) * c(3, 3)), 0.0, 0.02);
}

TEST(SampleKnockoffs, JointCovarianceMatchesG) {
  const kf::Matrix sigma = bivariate(0.5);
  const auto sampler = kf::build_sampler(kf::oracle_estimate(sigma));
  const kf::Matrix x = sample(100000, sigma, 3);
  const kf::Matrix xt = kf::sample_knockoffs(sampler, x, 4);
  kf::Matrix g(4, 4);
  const kf::Matrix off = sigma - kf::Matrix::Identity(2, 2);
  g << sigma, off, off, sigma;
  EXPECT_LT((joint_empirical(x, xt) - g).cwiseAbs().maxCoeff(), 0.02);
}

TEST(SampleKnockoffs, MomentsWithinThreeStandardErrors) {
  const Eigen::Index p = 3, n = 60000;
  kf::Matrix sigma(p, p);
  sigma << 1.0, 0.4, 0.1, 0.4, 2.0, -0.3, 0.1, -0.3, 0.5;
  const auto sampler = kf::build_sampler(kf::oracle_estimate(sigma));
  const kf::Matrix x = sample(n, sigma, 5);
  const kf::Matrix xt = kf::sample_knockoffs(sampler, x, 6);
  const kf::Matrix target = kf::joint_covariance(sampler);
  const kf::Matrix emp = joint_empirical(x, xt);
  for (Eigen::Index a = 0; a < 2 * p; ++a) {
    for (Eigen::Index b = 0; b < 2 * p; ++b) {
      // Var of a product of jointly Gaussian entries: σ_aa σ_bb + σ_ab².
      const double se = std::sqrt((target(a, a) * target(b, b) + target(a, b) * target(a, b)) / n);
      EXPECT_LT(std::abs(emp(a, b) - target(a, b)), 3.0 * se + 1e-3) << a << "," << b;
    }
  }
}

TEST(SampleKnockoffs, DeterministicAndWorkerInvariant) {
  kf::Matrix sigma(3, 3);
  sigma << 1, 0.3, 0, 0.3, 1, 0.3, 0, 0.3, 1;
  const auto sampler = kf::build_sampler(kf::oracle_estimate(sigma));
  const kf::Matrix x = sample(1000, sigma, 7);
  const kf::Matrix a = kf::sample_knockoffs(sampler, x, 8, false, 1);
  EXPECT_EQ(a, kf::sample_knockoffs(sampler, x, 8, false, 1));
  EXPECT_EQ(a, kf::sample_knockoffs(sampler, x, 8, false, 4));
  EXPECT_NE(a, kf::sample_knockoffs(sampler, x, 9, false, 1));
}

TEST(SampleKnockoffs, StrictModeNeedsSeed) {
  const auto sampler = kf::build_sampler(kf::oracle_estimate(kf::Matrix::Identity(2, 2)));
  const kf::Matrix x = kf::Matrix::Zero(5, 2);
  EXPECT_THROW(kf::sample_knockoffs(sampler, x, std::nullopt, true), kf::ContractViolation);
  EXPECT_NO_THROW(kf::sample_knockoffs(sampler, x, std::nullopt, false));
  EXPECT_THROW(kf::sample_knockoffs(sampler, kf::Matrix::Zero(5, 3), 1), kf::ContractViolation);
}
