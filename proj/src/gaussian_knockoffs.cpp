#include "knockforge/gaussian_knockoffs.hpp"

#include <algorithm>
#include <sstream>

#include "knockforge/errors.hpp"
#include "knockforge/parallel.hpp"
#include "knockforge/random.hpp"

namespace knockforge {

namespace {

constexpr double kLambdaMinClamp = 1e-10;

// Solves Σ·Z = B through a Cholesky factorization, falling back to LDLᵀ for
// matrices that are only semidefinite in floating point.
Matrix solve_sigma(const Matrix& sigma, const Matrix& rhs) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  Eigen::LDLT<Matrix> ldlt(sigma);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalFailure("build_sampler: covariance factorization failed");
  }
  return ldlt.solve(rhs);
}

}  // namespace

Vector equicorrelated_s(const CovarianceEstimate& sigma) {
  const Matrix& m = sigma.sigma;
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw ContractViolation("equicorrelated_s: covariance must be square and nonempty");
  }
  const double p = static_cast<double>(m.rows());
  const double trace = m.trace();
  const double lmin = min_eigenvalue(symmetrize(m));
  if (lmin < -1e-8 * std::max(1.0, trace / p)) {
    std::ostringstream msg;
    msg << "equicorrelated_s: covariance is not PSD (min eigenvalue " << lmin << ")";
    throw ContractViolation(msg.str());
  }
  const double value = std::min(2.0 * std::max(lmin, kLambdaMinClamp), trace / p);
  return Vector::Constant(m.rows(), value);
}

GaussianKnockoffSampler build_sampler(const CovarianceEstimate& estimate) {
  GaussianKnockoffSampler out;
  out.sigma = symmetrize(estimate.sigma);
  const Eigen::Index p = out.sigma.rows();
  out.s = equicorrelated_s(estimate);

  const Matrix d = out.s.asDiagonal();
  out.sigma_inv = solve_sigma(out.sigma, Matrix::Identity(p, p));
  out.mean_map = solve_sigma(out.sigma, d);
  const Matrix v = symmetrize(2.0 * d - d * out.mean_map);

  const double mean_diag = v.trace() / static_cast<double>(p);
  const double budget = 1e-6 * mean_diag;
  // A small positive floor keeps the Cholesky factorization defined when V is
  // singular, which happens whenever s = 2·λ_min(Σ).
  PsdRepair repaired = assert_psd(v, budget, 1e-10 * mean_diag);
  out.conditional_cov = std::move(repaired.matrix);
  out.jitter = repaired.jitter;
  out.warnings = std::move(repaired.warnings);

  Eigen::LLT<Matrix> llt(out.conditional_cov);
  if (llt.info() != Eigen::Success) {
    throw NonPsdError("build_sampler: Cholesky factorization of V failed",
                      min_eigenvalue(out.conditional_cov));
  }
  out.conditional_cov_cholesky = llt.matrixL();
  return out;
}

Matrix sample_knockoffs(const GaussianKnockoffSampler& sampler, const Matrix& x,
                        std::optional<std::uint64_t> seed, bool strict, std::size_t workers) {
  const Eigen::Index p = sampler.sigma.rows();
  if (x.cols() != p) {
    std::ostringstream msg;
    msg << "sample_knockoffs: design has " << x.cols() << " columns, sampler expects " << p;
    throw ContractViolation(msg.str());
  }
  if (!seed && strict) throw ContractViolation("sample_knockoffs: seed required in strict mode");
  const std::uint64_t base = seed.value_or(0);

  Matrix x_tilde = x - x * sampler.mean_map;
  const Eigen::Index n = x.rows();
  const std::size_t block = 256;
  const std::size_t blocks = (static_cast<std::size_t>(n) + block - 1) / block;
  parallel_for(blocks, workers, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b * block);
    const Eigen::Index end = std::min<Eigen::Index>(n, begin + static_cast<Eigen::Index>(block));
    Vector z(p);
    for (Eigen::Index i = begin; i < end; ++i) {
      Rng rng(derive_seed(base, Stream::kGaussianKnockoffRow, static_cast<std::uint64_t>(i)));
      for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
      x_tilde.row(i) += (sampler.conditional_cov_cholesky * z).transpose();
    }
  });
  return x_tilde;
}

Matrix joint_covariance(const GaussianKnockoffSampler& sampler) {
  const Eigen::Index p = sampler.sigma.rows();
  Matrix g(2 * p, 2 * p);
  const Matrix off = sampler.sigma - Matrix(sampler.s.asDiagonal());
  g.topLeftCorner(p, p) = sampler.sigma;
  g.bottomRightCorner(p, p) = sampler.sigma;
  g.topRightCorner(p, p) = off;
  g.bottomLeftCorner(p, p) = off;
  return g;
}

}  // namespace knockforge
