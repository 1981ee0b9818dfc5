#include "knockforge/simulation.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "knockforge/csv.hpp"
#include "knockforge/errors.hpp"
#include "knockforge/gaussian_knockoffs.hpp"
#include "knockforge/parallel.hpp"
#include "knockforge/random.hpp"

namespace knockforge {

namespace {

std::size_t support_size(std::size_t p, double sparsity) {
  return static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(p) + 1e-9));
}

std::size_t reflect(long index, std::size_t length) {
  const long period = 2 * static_cast<long>(length);
  long m = index % period;
  if (m < 0) m += period;
  if (m >= static_cast<long>(length)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix smoothing_matrix(const std::array<std::size_t, 3>& shape, double width) {
  return kronecker(smoothing_operator(shape[0], width),
                   kronecker(smoothing_operator(shape[1], width), smoothing_operator(shape[2], width)));
}

}  // namespace

void validate(const SimulationConfig& config) {
  if (config.n == 0) throw ContractViolation("simulation: n must be positive");
  for (std::size_t d : config.shape) {
    if (d == 0) throw ContractViolation("simulation: shape dimensions must be positive");
  }
  if (!(config.kernel_width >= 0.0)) throw ContractViolation("simulation: kernel width must be nonnegative");
  const std::size_t k = support_size(config.p(), config.sparsity);
  if (!(config.sparsity > 0.0) || k == 0 || k > config.p()) {
    throw ContractViolation("simulation: sparsity gives an empty or oversized support");
  }
  if (!(config.snr > 0.0)) throw ContractViolation("simulation: snr must be positive");
  if (!(config.q > 0.0 && config.q < 1.0)) throw ContractViolation("simulation: q must lie in (0, 1)");
}

Matrix smoothing_operator(std::size_t length, double width) {
  if (length == 0) throw ContractViolation("smoothing_operator: length must be positive");
  if (!(width >= 0.0)) throw ContractViolation("smoothing_operator: width must be nonnegative");
  const auto l = static_cast<Eigen::Index>(length);
  if (width == 0.0) return Matrix::Identity(l, l);
  const long radius = static_cast<long>(std::ceil(4.0 * width));
  std::vector<double> kernel;
  double total = 0.0;
  for (long t = -radius; t <= radius; ++t) {
    const double value = std::exp(-0.5 * static_cast<double>(t * t) / (width * width));
    kernel.push_back(value);
    total += value;
  }
  Matrix m = Matrix::Zero(l, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    for (long t = -radius; t <= radius; ++t) {
      const std::size_t source = reflect(static_cast<long>(i) + t, length);
      m(i, static_cast<Eigen::Index>(source)) += kernel[static_cast<std::size_t>(t + radius)] / total;
    }
  }
  return m;
}

Matrix generate_design(const SimulationConfig& config, std::uint64_t seed) {
  for (std::size_t d : config.shape) {
    if (d == 0) throw ContractViolation("generate_design: shape dimensions must be positive");
  }
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto p = static_cast<Eigen::Index>(config.p());
  Matrix z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, Stream::kDesign, static_cast<std::uint64_t>(i)));
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = rng.normal();
  }
  Matrix x = config.kernel_width > 0.0
                 ? Matrix(z * smoothing_matrix(config.shape, config.kernel_width).transpose())
                 : z;
  if (config.standardize) {
    const ColumnMoments moments = column_moments(x);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (moments.sd(j) > 0.0) x.col(j) /= moments.sd(j);
    }
  }
  return x;
}

Matrix oracle_covariance(const std::array<std::size_t, 3>& shape, double width) {
  const Matrix a = smoothing_matrix(shape, width);
  return symmetrize(a * a.transpose());
}

SimulationTruth draw_support(std::size_t p, double sparsity, std::uint64_t seed) {
  const std::size_t k = support_size(p, sparsity);
  if (k == 0 || k > p) throw ContractViolation("draw_support: support size must lie in [1, p]");
  Rng rng(derive_seed(seed, Stream::kSupport));
  const std::vector<std::size_t> perm = random_permutation(p, rng);
  SimulationTruth truth;
  truth.beta_star = Vector::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < k; ++r) truth.beta_star(static_cast<Eigen::Index>(perm[r])) = 1.0;
  for (std::size_t j = 0; j < p; ++j) {
    (truth.beta_star(static_cast<Eigen::Index>(j)) != 0.0 ? truth.h1 : truth.h0).push_back(j);
  }
  return truth;
}

Response generate_response(const Matrix& x, const Vector& beta_star, double snr, std::uint64_t seed) {
  if (!(snr > 0.0)) throw ContractViolation("generate_response: snr must be positive");
  if (x.cols() != beta_star.size()) throw ContractViolation("generate_response: beta length mismatch");
  if ((beta_star.array() != 0.0).count() == 0) {
    throw ContractViolation("generate_response: beta has no nonzero entry");
  }
  const Vector signal = x * beta_star;
  const double signal_norm = signal.norm();
  if (signal_norm == 0.0) throw DegenerateInput("generate_response: X·beta is identically zero");
  Rng rng(derive_seed(seed, Stream::kNoise));
  Vector eps(x.rows());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
  Response out;
  out.sigma_noise = signal_norm / (snr * eps.norm());
  out.y = signal + out.sigma_noise * eps;
  return out;
}

Matrix shuffle_pairings(const Matrix& x_tilde, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractViolation("shuffle_pairings: fraction must lie in [0, 1]");
  }
  const auto n = static_cast<std::size_t>(x_tilde.rows());
  const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  Matrix out = x_tilde;
  if (m < 2) return out;
  Rng rng(derive_seed(seed, Stream::kPairingShuffle));
  // The first m entries of a uniform permutation are a uniform ordered subset;
  // rotating along that order is a uniform m-cycle on the subset.
  const std::vector<std::size_t> perm = random_permutation(n, rng);
  for (std::size_t r = 0; r < m; ++r) {
    out.row(static_cast<Eigen::Index>(perm[r])) = x_tilde.row(static_cast<Eigen::Index>(perm[(r + 1) % m]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

std::string BenchmarkMethod::name() const { return to_string(method); }

std::string BenchmarkMethod::cov_name() const {
  return method == KnockoffMethod::kGaussian ? to_string(cov) : "none";
}

std::vector<BenchmarkMethod> expand_methods(const std::vector<KnockoffMethod>& methods,
                                            const std::vector<CovarianceMethod>& covariances) {
  std::vector<BenchmarkMethod> out;
  for (KnockoffMethod m : methods) {
    if (m == KnockoffMethod::kGaussian) {
      if (covariances.empty()) throw UsageError("gaussian method needs at least one covariance option");
      for (CovarianceMethod c : covariances) out.push_back({m, c});
    } else {
      out.push_back({m, CovarianceMethod::kOracle});
    }
  }
  return out;
}

std::uint64_t run_seed(std::uint64_t master, std::size_t run) {
  return derive_seed(master, Stream::kBenchmarkRun, static_cast<std::uint64_t>(run));
}

BenchmarkRow run_single(const SimulationConfig& config, const BenchmarkMethod& method, std::size_t run,
                        std::uint64_t seed, const BenchmarkOptions& options) {
  BenchmarkRow row;
  row.run = run;
  row.method = method.name();
  row.cov = method.cov_name();
  row.w = config.kernel_width;
  row.n = config.n;
  row.p = config.p();
  row.q = config.q;
  row.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Matrix x = generate_design(config, derive_seed(seed, Stream::kDesign));
    const SimulationTruth truth = draw_support(config.p(), config.sparsity, seed);
    const Response response = generate_response(x, truth.beta_star, config.snr, seed);

    const std::uint64_t generation_seed = derive_seed(seed, Stream::kKnockoffGeneration);
    Matrix x_tilde;
    NonparametricOptions np;
    np.shared_permutation = options.shared_permutation;
    switch (method.method) {
      case KnockoffMethod::kGaussian: {
        CovarianceOptions cov = options.covariance;
        cov.method = method.cov;
        cov.seed = derive_seed(seed, Stream::kFoldAssignment);
        cov.workers = 1;
        if (method.cov == CovarianceMethod::kOracle && cov.oracle.rows() != x.cols()) {
          cov.oracle = oracle_covariance(config.shape, config.kernel_width);
        }
        const GaussianKnockoffSampler sampler = build_sampler(estimate_covariance(x, cov));
        x_tilde = sample_knockoffs(sampler, x, generation_seed);
        break;
      }
      case KnockoffMethod::kSequential:
        x_tilde = sequential_knockoffs(x, generation_seed, np).x_tilde;
        break;
      case KnockoffMethod::kParallel:
        x_tilde = parallel_knockoffs(x, generation_seed, np).x_tilde;
        break;
      case KnockoffMethod::kCrossfit:
        x_tilde = crossfit_knockoffs(x, options.crossfit_folds, generation_seed, np).x_tilde;
        break;
    }

    const KnockoffStatistics stats = lcd_statistics(x, x_tilde, response.y, options.lcd);
    const SelectionResult selection = knockoff_select(stats.w, config.q);
    row.fdp = fdp(selection.selected, truth.h0);
    row.power = power(selection.selected, truth.h1);
    row.selected = selection.selected.size();
    for (std::size_t j : truth.h0) {
      const double wj = stats.w(static_cast<Eigen::Index>(j));
      row.null_positive += wj > 0.0;
      row.null_nonzero += wj != 0.0;
    }
    C2stOptions c2 = options.c2st;
    c2.workers = 1;
    const C2stReport report = c2st(x, x_tilde, derive_seed(seed, Stream::kC2stSplit), c2);
    row.c2st_acc = report.mean_accuracy;
    row.c2st_pval = report.p_value;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wallclock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

BenchmarkTable run_benchmark(const SimulationConfig& config, const std::vector<BenchmarkMethod>& methods,
                             const BenchmarkOptions& options) {
  validate(config);
  if (config.runs == 0) throw ContractViolation("run_benchmark: runs must be at least 1");
  if (methods.empty()) throw ContractViolation("run_benchmark: no methods");
  BenchmarkOptions shared = options;
  for (const BenchmarkMethod& m : methods) {
    if (m.method == KnockoffMethod::kGaussian && m.cov == CovarianceMethod::kOracle &&
        shared.covariance.oracle.rows() != static_cast<Eigen::Index>(config.p())) {
      shared.covariance.oracle = oracle_covariance(config.shape, config.kernel_width);
    }
  }
  BenchmarkTable table;
  table.rows.resize(config.runs * methods.size());
  parallel_for(table.rows.size(), options.workers, [&](std::size_t t) {
    const std::size_t run = t / methods.size();
    const std::size_t m = t % methods.size();
    table.rows[t] = run_single(config, methods[m], run, run_seed(config.seed, run), shared);
  });
  return table;
}

void write_benchmark_csv(std::ostream& out, const BenchmarkTable& table) {
  out << kBenchmarkHeader << '\n';
  for (const BenchmarkRow& r : table.rows) {
    out << r.run << ',' << r.method << ',' << r.cov << ',' << format_double(r.w) << ',' << r.n << ','
        << r.p << ',' << format_double(r.q) << ',';
    if (r.error.empty()) {
      out << format_double(r.fdp) << ',' << format_double(r.power) << ',' << format_double(r.c2st_acc)
          << ',' << format_double(r.c2st_pval);
    } else {
      out << "nan,nan,nan,nan";
    }
    out << ',' << r.seed << ',' << format_double(r.wallclock_ms) << '\n';
  }
}

std::vector<MethodSummary> summarize(const BenchmarkTable& table) {
  std::vector<MethodSummary> out;
  std::map<std::tuple<std::string, std::string, double>, std::size_t> index;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> nonzero;
  for (const BenchmarkRow& r : table.rows) {
    const auto key = std::make_tuple(r.method, r.cov, r.w);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      MethodSummary s;
      s.method = r.method;
      s.cov = r.cov;
      s.w = r.w;
      out.push_back(s);
      positives.push_back(0);
      nonzero.push_back(0);
    }
    MethodSummary& s = out[it->second];
    if (!r.error.empty()) {
      ++s.failed;
      continue;
    }
    ++s.runs;
    s.mean_fdp += r.fdp;
    s.mean_power += r.power;
    s.mean_c2st_acc += r.c2st_acc;
    positives[it->second] += r.null_positive;
    nonzero[it->second] += r.null_nonzero;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    MethodSummary& s = out[i];
    if (s.runs > 0) {
      s.mean_fdp /= static_cast<double>(s.runs);
      s.mean_power /= static_cast<double>(s.runs);
      s.mean_c2st_acc /= static_cast<double>(s.runs);
    }
    s.null_positive_fraction =
        nonzero[i] > 0 ? static_cast<double>(positives[i]) / static_cast<double>(nonzero[i]) : 0.0;
  }
  return out;
}

}  // namespace knockforge
