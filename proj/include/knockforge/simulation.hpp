#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "knockforge/covariance.hpp"
#include "knockforge/diagnostics.hpp"
#include "knockforge/inference.hpp"
#include "knockforge/linalg.hpp"
#include "knockforge/nonparametric_knockoffs.hpp"

namespace knockforge {

struct SimulationConfig {
  std::size_t n = 200;
  std::array<std::size_t, 3> shape = {10, 10, 2};
  double kernel_width = 0.0;
  double sparsity = 0.1;
  double snr = 2.0;
  std::uint64_t seed = 0;
  std::size_t runs = 30;
  double q = 0.1;
  bool standardize = false;  // rescale design columns to unit sd after smoothing

  std::size_t p() const { return shape[0] * shape[1] * shape[2]; }
};

// Throws ContractViolation for zero dimensions, negative width, or a support
// size outside [1, p].
void validate(const SimulationConfig& config);

struct SimulationTruth {
  Vector beta_star;  // 0/1 entries
  std::vector<std::size_t> h1;
  std::vector<std::size_t> h0;
  double sigma_noise = 0.0;
};

// 1-D smoothing operator of one axis: a truncated (radius ⌈4w⌉), normalized
// Gaussian kernel with half-sample symmetric reflection at the edges.
Matrix smoothing_operator(std::size_t length, double width);

// n i.i.d. standard normal (a, b, c) tensors, each smoothed along every axis
// and flattened row-major (last axis fastest).
Matrix generate_design(const SimulationConfig& config, std::uint64_t seed);

// A·Aᵀ with A = Ma ⊗ Mb ⊗ Mc the smoothing operator on flattened tensors.
Matrix oracle_covariance(const std::array<std::size_t, 3>& shape, double width);

// ⌊s_p·p⌋ distinct indices drawn uniformly.
SimulationTruth draw_support(std::size_t p, double sparsity, std::uint64_t seed);

struct Response {
  Vector y;
  double sigma_noise = 0.0;
};

// y = Xβ* + σε with σ = ‖Xβ*‖ / (snr·‖ε‖).
Response generate_response(const Matrix& x, const Vector& beta_star, double snr, std::uint64_t seed);

// Moves ⌊fraction·n⌋ uniformly chosen rows along a uniform random cycle, so
// each chosen row lands on a different chosen row's position.
Matrix shuffle_pairings(const Matrix& x_tilde, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct BenchmarkMethod {
  KnockoffMethod method = KnockoffMethod::kParallel;
  CovarianceMethod cov = CovarianceMethod::kOracle;  // gaussian only

  std::string name() const;        // "gaussian", "parallel", ...
  std::string cov_name() const;    // covariance label, "none" for nonparametric
};

// Every gaussian entry is paired with each covariance option; nonparametric
// methods appear once.
std::vector<BenchmarkMethod> expand_methods(const std::vector<KnockoffMethod>& methods,
                                            const std::vector<CovarianceMethod>& covariances);

struct BenchmarkOptions {
  std::size_t workers = 1;  // concurrent runs
  LcdOptions lcd;
  C2stOptions c2st;
  CovarianceOptions covariance;  // method and oracle fields are filled per row
  int crossfit_folds = 2;
  bool shared_permutation = false;
};

struct BenchmarkRow {
  std::size_t run = 0;
  std::string method;
  std::string cov;
  double w = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
  double q = 0.0;
  double fdp = 0.0;
  double power = 0.0;
  double c2st_acc = 0.0;
  double c2st_pval = 1.0;
  std::uint64_t seed = 0;
  double wallclock_ms = 0.0;
  // Not serialized to the table.
  std::size_t null_positive = 0;
  std::size_t null_nonzero = 0;
  std::size_t selected = 0;
  std::string error;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;
};

// Seed identifying run r under a master seed.
std::uint64_t run_seed(std::uint64_t master, std::size_t run);

// Runs config.runs simulations, each generating data from its run seed and
// evaluating every method. Row order is (run, method) regardless of workers.
// A failing (run, method) is recorded in the row's error field.
BenchmarkTable run_benchmark(const SimulationConfig& config, const std::vector<BenchmarkMethod>& methods,
                             const BenchmarkOptions& options = {});

// One (run, method) evaluation, reproducible in isolation from its seed.
BenchmarkRow run_single(const SimulationConfig& config, const BenchmarkMethod& method,
                        std::size_t run, std::uint64_t seed, const BenchmarkOptions& options);

inline constexpr const char* kBenchmarkHeader =
    "run,method,cov,w,n,p,q,fdp,power,c2st_acc,c2st_pval,seed,wallclock_ms";

void write_benchmark_csv(std::ostream& out, const BenchmarkTable& table);

struct MethodSummary {
  std::string method;
  std::string cov;
  double w = 0.0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_fdp = 0.0;
  double mean_power = 0.0;
  double mean_c2st_acc = 0.0;
  double null_positive_fraction = 0.0;  // pooled over runs
};

// Means per (method, cov, w) over rows without errors, in first-seen order.
std::vector<MethodSummary> summarize(const BenchmarkTable& table);

}  // namespace knockforge
