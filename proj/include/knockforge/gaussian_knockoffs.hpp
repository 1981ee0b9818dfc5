#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "knockforge/covariance.hpp"
#include "knockforge/linalg.hpp"

namespace knockforge {

// Precomputed pieces of the equi-correlated Gaussian knockoff distribution.
// Row i of a knockoff matrix is drawn from N(xᵢ − xᵢΣ⁻¹D, V) with D = diag(s)
// and V = 2D − DΣ⁻¹D.
struct GaussianKnockoffSampler {
  Matrix sigma;
  Matrix sigma_inv;
  Vector s;
  Matrix mean_map;                  // Σ⁻¹D, so µ = X − X·mean_map
  Matrix conditional_cov;           // V after PSD repair
  Matrix conditional_cov_cholesky;  // lower triangular, L·Lᵀ = V
  double jitter = 0.0;
  std::vector<std::string> warnings;
};

// Constant vector min(2·λ_min(Σ), tr(Σ)/p). λ_min is clamped at 1e-10.
// Throws ContractViolation when Σ has a clearly negative eigenvalue.
Vector equicorrelated_s(const CovarianceEstimate& sigma);

// Throws NonPsdError when V needs more jitter than 1e-6·tr(V)/p.
GaussianKnockoffSampler build_sampler(const CovarianceEstimate& sigma);

// Row i uses its own generator seeded from (seed, i), so the output does not
// depend on `workers`. A missing seed falls back to a fixed default unless
// `strict` is set, in which case it is a ContractViolation.
Matrix sample_knockoffs(const GaussianKnockoffSampler& sampler, const Matrix& x,
                        std::optional<std::uint64_t> seed, bool strict = false,
                        std::size_t workers = 1);

// Joint covariance [[Σ, Σ − D], [Σ − D, Σ]] implied by the sampler.
Matrix joint_covariance(const GaussianKnockoffSampler& sampler);

}  // namespace knockforge
