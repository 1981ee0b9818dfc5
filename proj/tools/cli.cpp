#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "knockforge/covariance.hpp"
#include "knockforge/csv.hpp"
#include "knockforge/diagnostics.hpp"
#include "knockforge/errors.hpp"
#include "knockforge/gaussian_knockoffs.hpp"
#include "knockforge/inference.hpp"
#include "knockforge/nonparametric_knockoffs.hpp"
#include "knockforge/parallel.hpp"
#include "knockforge/random.hpp"
#include "knockforge/simulation.hpp"

#ifndef KNOCKFORGE_VERSION
#define KNOCKFORGE_VERSION "0.0.0"
#endif
#ifndef KNOCKFORGE_BUILD_HASH
#define KNOCKFORGE_BUILD_HASH "unknown"
#endif

namespace knockforge::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  bool strict = false;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* app, Common& common) {
  app->add_option("--seed", common.seed, "Master seed");
  app->add_flag("--strict", common.strict, "Require an explicit --seed");
  app->add_option("--workers", common.workers, "Worker threads (default: KNOCKFORGE_WORKERS or 1)");
}

std::uint64_t require_seed(const Common& common) {
  if (!common.seed && common.strict) throw UsageError("--seed is required in --strict mode");
  return common.seed.value_or(0);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string joined(const std::vector<std::string>& args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) out += (i ? " " : "") + args[i];
  return out;
}

json manifest(const std::vector<std::string>& args, std::uint64_t seed,
              const std::vector<std::string>& inputs) {
  json m;
  m["command_line"] = joined(args);
  m["seed"] = seed;
  m["version"] = version_string();
  json digests = json::object();
  for (const std::string& path : inputs) digests[path] = file_digest(path);
  m["input_digests"] = digests;
  m["timestamp"] = utc_timestamp();
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

void emit_json(const json& report, const std::string& path, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text(path, text);
  }
}

json number_or_inf(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

json one_based(const std::vector<std::size_t>& indices) {
  json out = json::array();
  for (std::size_t j : indices) out.push_back(j + 1);
  return out;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_or_inf(v(i)));
  return out;
}

Matrix read_design(const std::string& path) {
  Matrix m = read_csv(path).values;
  if (m.rows() == 0 || m.cols() == 0) throw ContractViolation(path + ": no data rows");
  return m;
}

void check_aligned(const Matrix& x, const std::string& x_path, const Matrix& other,
                   const std::string& other_path) {
  if (x.rows() != other.rows()) {
    throw ContractViolation(other_path + " has " + std::to_string(other.rows()) + " rows but " + x_path +
                            " has " + std::to_string(x.rows()));
  }
  if (x.cols() != other.cols()) {
    throw ContractViolation(other_path + " has " + std::to_string(other.cols()) + " columns but " +
                            x_path + " has " + std::to_string(x.cols()));
  }
}

std::array<std::size_t, 3> parse_shape(const std::string& text) {
  std::array<std::size_t, 3> shape{};
  std::stringstream in(text);
  std::string part;
  std::size_t k = 0;
  while (std::getline(in, part, ',')) {
    if (k == 3) throw UsageError("--shape needs exactly three dimensions");
    try {
      std::size_t used = 0;
      const long value = std::stol(part, &used);
      if (used != part.size() || value <= 0) throw std::invalid_argument(part);
      shape[k++] = static_cast<std::size_t>(value);
    } catch (const std::logic_error&) {
      throw UsageError("invalid --shape component '" + part + "'");
    }
  }
  if (k != 3) throw UsageError("--shape needs exactly three dimensions");
  return shape;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto b = part.find_first_not_of(" \t\"'");
    const auto e = part.find_last_not_of(" \t\"'");
    if (b != std::string::npos) out.push_back(part.substr(b, e - b + 1));
  }
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw UsageError("invalid number for " + key + ": '" + text + "'");
  }
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_real(key, text);
  if (v < 0 || v != std::floor(v)) throw UsageError("invalid integer for " + key + ": '" + text + "'");
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError("invalid boolean for " + key + ": '" + text + "'");
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const std::string& part : split_list(text)) out.push_back(parse_real(key, part));
  if (out.empty()) throw UsageError(key + " is empty");
  return out;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::size_t n = 200;
  std::string shape = "10,10,2";
  double width = 0.0;
  double sparsity = 0.1;
  double snr = 2.0;
  bool standardize = false;
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  SimulationConfig config;
  config.n = a.n;
  config.shape = parse_shape(a.shape);
  config.kernel_width = a.width;
  config.sparsity = a.sparsity;
  config.snr = a.snr;
  config.standardize = a.standardize;
  config.seed = require_seed(a.common);
  try {
    validate(config);
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create '" + a.out_dir + "': " + ec.message());

  const Matrix x = generate_design(config, derive_seed(config.seed, Stream::kDesign));
  const SimulationTruth truth = draw_support(config.p(), config.sparsity, config.seed);
  const Response response = generate_response(x, truth.beta_star, config.snr, config.seed);

  const fs::path dir(a.out_dir);
  write_csv_file((dir / "design.csv").string(), x, variable_header(config.p()));
  write_vector_csv_file((dir / "response.csv").string(), response.y, "y");
  write_vector_csv_file((dir / "beta.csv").string(), truth.beta_star, "beta");
  json m = manifest(args, config.seed, {});
  m["sigma_noise"] = response.sigma_noise;
  m["support"] = one_based(truth.h1);
  write_text((dir / "manifest.json").string(), m.dump(2) + "\n");
  out << "wrote " << x.rows() << "x" << x.cols() << " design to " << (dir / "design.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// knockoffs
// ---------------------------------------------------------------------------

struct KnockoffArgs {
  Common common;
  std::string design;
  std::string method = "parallel";
  std::string cov = "lw";
  std::string oracle_sigma;
  std::optional<double> alpha;
  int folds = 2;
  bool shared_permutation = false;
  double lambda_fraction = 0.01;
  double shuffle = 0.0;
  std::string out;
};

int cmd_knockoffs(const KnockoffArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const std::uint64_t seed = require_seed(a.common);
  const KnockoffMethod method = parse_knockoff_method(a.method);
  const std::size_t workers = resolve_workers(a.common.workers);
  const Matrix x = read_design(a.design);
  std::vector<std::string> inputs = {a.design};

  json sidecar;
  sidecar["method"] = to_string(method);
  sidecar["seed"] = seed;
  Matrix x_tilde;
  if (method == KnockoffMethod::kGaussian) {
    CovarianceOptions options;
    options.method = parse_covariance_method(a.cov);
    options.seed = seed;
    options.workers = workers;
    options.alpha = a.alpha;
    if (options.method == CovarianceMethod::kOracle) {
      if (a.oracle_sigma.empty()) throw UsageError("--cov oracle requires --oracle-sigma");
      options.oracle = read_csv(a.oracle_sigma).values;
      inputs.push_back(a.oracle_sigma);
      if (options.oracle.rows() != x.cols() || options.oracle.cols() != x.cols()) {
        throw ContractViolation(a.oracle_sigma + ": expected a " + std::to_string(x.cols()) + "x" +
                                std::to_string(x.cols()) + " matrix");
      }
    }
    const CovarianceEstimate estimate = estimate_covariance(x, options);
    const GaussianKnockoffSampler sampler = build_sampler(estimate);
    x_tilde = sample_knockoffs(sampler, x, seed, a.common.strict, workers);
    sidecar["cov"] = to_string(estimate.method);
    sidecar["shrinkage_or_penalty"] = estimate.shrinkage_or_penalty;
    sidecar["min_eigenvalue"] = estimate.min_eigenvalue;
    sidecar["s"] = sampler.s.size() ? sampler.s(0) : 0.0;
    json warnings = json::array();
    for (const auto& w : estimate.warnings) warnings.push_back(w);
    for (const auto& w : sampler.warnings) warnings.push_back(w);
    sidecar["warnings"] = warnings;
  } else {
    NonparametricOptions options;
    options.lambda_rule = lambda_max_fraction(a.lambda_fraction);
    options.workers = workers;
    options.shared_permutation = a.shared_permutation;
    KnockoffPair pair;
    if (method == KnockoffMethod::kSequential) {
      pair = sequential_knockoffs(x, seed, options);
    } else if (method == KnockoffMethod::kParallel) {
      pair = parallel_knockoffs(x, seed, options);
    } else {
      pair = crossfit_knockoffs(x, a.folds, seed, options);
    }
    x_tilde = std::move(pair.x_tilde);
    json log = json::array();
    for (const ColumnLog& c : pair.generation_log) {
      log.push_back({{"column", c.column + 1},
                     {"lambda", c.lambda},
                     {"residual_variance", c.residual_variance},
                     {"converged", c.converged}});
    }
    sidecar["generation_log"] = log;
    sidecar["warnings"] = pair.warnings;
  }
  if (a.shuffle > 0.0) {
    x_tilde = shuffle_pairings(x_tilde, a.shuffle, seed);
    sidecar["shuffled_fraction"] = a.shuffle;
  }
  write_csv_file(a.out, x_tilde, variable_header(static_cast<std::size_t>(x.cols())));
  write_text(a.out + ".json", sidecar.dump(2) + "\n");
  write_text(a.out + ".manifest.json", manifest(args, seed, inputs).dump(2) + "\n");
  out << "wrote " << x_tilde.rows() << "x" << x_tilde.cols() << " knockoffs to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

struct SelectArgs {
  Common common;
  std::string design;
  std::string knockoffs;
  std::string response;
  double q = 0.1;
  std::string lambda = "max100";
  bool pi_only = false;
  std::string out;
};

int cmd_select(const SelectArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const std::uint64_t seed = require_seed(a.common);
  if (!(a.q > 0.0 && a.q < 1.0)) throw UsageError("--q must lie in (0, 1)");
  const Matrix x = read_design(a.design);
  const Matrix x_tilde = read_design(a.knockoffs);
  check_aligned(x, a.design, x_tilde, a.knockoffs);
  const Vector y = read_vector_csv(a.response);
  if (y.size() != x.rows()) {
    throw ContractViolation(a.response + " has " + std::to_string(y.size()) + " rows but " + a.design +
                            " has " + std::to_string(x.rows()));
  }
  const KnockoffStatistics stats = lcd_statistics(x, x_tilde, y, parse_lcd_lambda(a.lambda));
  json report;
  if (a.pi_only) {
    const Vector pi = pi_statistics(stats.w);
    report["pi"] = vector_json(pi);
    report["q"] = a.q;
    report["selected"] = one_based(bh_select(pi, a.q));
  } else {
    const SelectionResult selection = knockoff_select(stats.w, a.q);
    report["w"] = vector_json(stats.w);
    report["threshold"] = number_or_inf(selection.threshold);
    report["q"] = a.q;
    report["selected"] = one_based(selection.selected);
    report["pi"] = vector_json(selection.pi);
    report["lambda"] = stats.lambda;
    report["converged"] = stats.fit_converged;
  }
  emit_json(report, a.out, out);
  if (!a.out.empty() && a.out != "-") {
    write_text(a.out + ".manifest.json",
               manifest(args, seed, {a.design, a.knockoffs, a.response}).dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  Common common;
  std::string design;
  std::string knockoffs;
  std::string out;
  // c2st
  int folds = 5;
  double l2 = 1.0;
  double alpha = 0.01;
  std::string split = "split";
  // pairing
  double threshold = 0.99;
  std::size_t cap = 5000;
  bool subsample = false;
};

int cmd_diagnose(const DiagnoseArgs& a, bool pairing, const std::vector<std::string>& args,
                 std::ostream& out) {
  const std::uint64_t seed = require_seed(a.common);
  const Matrix x = read_design(a.design);
  const Matrix x_tilde = read_design(a.knockoffs);
  check_aligned(x, a.design, x_tilde, a.knockoffs);
  json report;
  if (pairing) {
    PairingOptions options;
    options.threshold = a.threshold;
    options.cap = a.cap;
    options.subsample = a.subsample;
    options.seed = seed;
    const PairingReport r = pairing_check(x, x_tilde, options);
    json assignment = json::array();
    for (std::size_t i = 0; i < r.assignment.size(); ++i) assignment.push_back(r.rows[r.assignment[i]] + 1);
    report["assignment"] = assignment;
    report["identity_fraction"] = r.identity_fraction;
    report["total_cost"] = r.total_cost;
    report["verdict"] = to_string(r.verdict);
  } else {
    C2stOptions options;
    options.folds = a.folds;
    options.l2_penalty = a.l2;
    options.alpha = a.alpha;
    options.design = parse_c2st_design(a.split);
    options.workers = resolve_workers(a.common.workers);
    const C2stReport r = c2st(x, x_tilde, seed, options);
    report["fold_accuracies"] = r.fold_accuracies;
    report["mean_accuracy"] = r.mean_accuracy;
    report["n_test_total"] = r.n_test_total;
    report["correct_total"] = r.correct_total;
    report["p_value"] = r.p_value;
    report["verdict"] = to_string(r.verdict);
    report["log"] = r.log;
  }
  emit_json(report, a.out, out);
  if (!a.out.empty() && a.out != "-") {
    write_text(a.out + ".manifest.json", manifest(args, seed, {a.design, a.knockoffs}).dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  Common common;
  std::string config;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> n;
  std::optional<std::string> shape;
  std::optional<std::string> methods;
  std::optional<std::string> covariances;
  std::optional<std::string> w_sweep;
  std::optional<std::string> lambda;
  bool compare_wallclock = false;
  std::string out_dir = "benchmark_out";
};

struct BenchmarkPlan {
  SimulationConfig config;
  std::vector<double> widths = {0.0};
  std::vector<KnockoffMethod> methods = {KnockoffMethod::kGaussian, KnockoffMethod::kParallel};
  std::vector<CovarianceMethod> covariances = {CovarianceMethod::kGraphicalLasso};
  BenchmarkOptions options;
  bool wallclock = false;
};

void apply_setting(BenchmarkPlan& plan, const std::string& key, const std::string& value) {
  if (key == "n") {
    plan.config.n = parse_count(key, value);
  } else if (key == "shape") {
    plan.config.shape = parse_shape(value);
  } else if (key == "kernel_width" || key == "w") {
    plan.widths = {parse_real(key, value)};
  } else if (key == "w_sweep") {
    plan.widths = parse_reals(key, value);
  } else if (key == "sparsity") {
    plan.config.sparsity = parse_real(key, value);
  } else if (key == "snr") {
    plan.config.snr = parse_real(key, value);
  } else if (key == "seed") {
    plan.config.seed = parse_count(key, value);
  } else if (key == "runs") {
    plan.config.runs = parse_count(key, value);
  } else if (key == "q") {
    plan.config.q = parse_real(key, value);
  } else if (key == "standardize") {
    plan.config.standardize = parse_bool(key, value);
  } else if (key == "methods") {
    plan.methods.clear();
    for (const std::string& m : split_list(value)) plan.methods.push_back(parse_knockoff_method(m));
    if (plan.methods.empty()) throw UsageError("methods is empty");
  } else if (key == "covariances" || key == "cov") {
    plan.covariances.clear();
    for (const std::string& c : split_list(value)) plan.covariances.push_back(parse_covariance_method(c));
  } else if (key == "lambda") {
    plan.options.lcd = parse_lcd_lambda(value);
  } else if (key == "c2st_design") {
    plan.options.c2st.design = parse_c2st_design(value);
  } else if (key == "c2st_folds") {
    plan.options.c2st.folds = static_cast<int>(parse_count(key, value));
  } else if (key == "c2st_l2") {
    plan.options.c2st.l2_penalty = parse_real(key, value);
  } else if (key == "crossfit_folds") {
    plan.options.crossfit_folds = static_cast<int>(parse_count(key, value));
  } else if (key == "shared_permutation") {
    plan.options.shared_permutation = parse_bool(key, value);
  } else if (key == "alpha_factors") {
    plan.options.covariance.alpha_factors = parse_reals(key, value);
  } else if (key == "wallclock") {
    plan.wallclock = parse_bool(key, value);
  } else {
    throw UsageError("unknown benchmark setting '" + key + "'");
  }
}

json summary_json(const std::vector<MethodSummary>& summaries) {
  json out = json::array();
  for (const MethodSummary& s : summaries) {
    out.push_back({{"method", s.method},
                   {"cov", s.cov},
                   {"w", s.w},
                   {"runs", s.runs},
                   {"failed", s.failed},
                   {"mean_fdp", s.mean_fdp},
                   {"mean_power", s.mean_power},
                   {"mean_c2st_acc", s.mean_c2st_acc},
                   {"null_positive_fraction", s.null_positive_fraction}});
  }
  return out;
}

int cmd_benchmark(const BenchmarkArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  BenchmarkPlan plan;
  std::vector<std::string> inputs;
  if (!a.config.empty()) {
    std::ifstream in(a.config, std::ios::binary);
    if (!in) throw IoError("cannot read '" + a.config + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    for (const auto& [key, value] : parse_key_values(buffer.str())) apply_setting(plan, key, value);
    inputs.push_back(a.config);
  }
  if (a.runs) plan.config.runs = *a.runs;
  if (a.n) plan.config.n = *a.n;
  if (a.shape) apply_setting(plan, "shape", *a.shape);
  if (a.methods) apply_setting(plan, "methods", *a.methods);
  if (a.covariances) apply_setting(plan, "covariances", *a.covariances);
  if (a.w_sweep) apply_setting(plan, "w_sweep", *a.w_sweep);
  if (a.lambda) apply_setting(plan, "lambda", *a.lambda);
  if (a.common.seed) plan.config.seed = *a.common.seed;
  if (!a.common.seed && a.common.strict) throw UsageError("--seed is required in --strict mode");
  plan.wallclock = plan.wallclock || a.compare_wallclock;
  const std::size_t workers = resolve_workers(a.common.workers);
  plan.options.workers = workers;

  const std::vector<BenchmarkMethod> methods = expand_methods(plan.methods, plan.covariances);
  BenchmarkTable table;
  for (double w : plan.widths) {
    SimulationConfig config = plan.config;
    config.kernel_width = w;
    try {
      validate(config);
    } catch (const ContractViolation& e) {
      throw UsageError(e.what());
    }
    BenchmarkTable part = run_benchmark(config, methods, plan.options);
    table.rows.insert(table.rows.end(), part.rows.begin(), part.rows.end());
  }

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create '" + a.out_dir + "': " + ec.message());
  const fs::path dir(a.out_dir);
  {
    std::ofstream csv((dir / "benchmark.csv").string(), std::ios::binary);
    if (!csv) throw IoError("cannot write '" + (dir / "benchmark.csv").string() + "'");
    write_benchmark_csv(csv, table);
  }
  json summary;
  summary["methods"] = summary_json(summarize(table));
  json errors = json::array();
  for (const BenchmarkRow& r : table.rows) {
    if (!r.error.empty()) errors.push_back({{"run", r.run}, {"method", r.method}, {"w", r.w}, {"error", r.error}});
  }
  summary["errors"] = errors;

  if (plan.wallclock) {
    SimulationConfig config = plan.config;
    config.kernel_width = plan.widths.front();
    const Matrix x = generate_design(config, derive_seed(config.seed, Stream::kDesign));
    NonparametricOptions options;
    const auto t0 = std::chrono::steady_clock::now();
    sequential_knockoffs(x, config.seed, options);
    const auto t1 = std::chrono::steady_clock::now();
    options.workers = workers;
    parallel_knockoffs(x, config.seed, options);
    const auto t2 = std::chrono::steady_clock::now();
    const double seq_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    const double par_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    summary["wallclock"] = {{"n", x.rows()},
                            {"p", x.cols()},
                            {"workers", workers},
                            {"sequential_ms", seq_ms},
                            {"parallel_ms", par_ms},
                            {"speedup", par_ms > 0.0 ? seq_ms / par_ms : 0.0}};
  }
  write_text((dir / "summary.json").string(), summary.dump(2) + "\n");
  write_text((dir / "manifest.json").string(), manifest(args, plan.config.seed, inputs).dump(2) + "\n");
  out << "wrote " << table.rows.size() << " rows to " << (dir / "benchmark.csv").string() << "\n";
  return 0;
}

}  // namespace

std::string version_string() {
  return std::string("knockforge ") + KNOCKFORGE_VERSION + " (build " + KNOCKFORGE_BUILD_HASH + ")";
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      value = trim(value.substr(1, value.size() - 2));
    }
    std::string cleaned;
    for (char c : value) {
      if (c != '"' && c != '\'') cleaned += c;
    }
    if (key.empty()) throw UsageError("config line " + std::to_string(number) + ": empty key");
    out.emplace_back(key, trim(cleaned));
  }
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[1 << 14];
  while (in) {
    in.read(buffer, sizeof(buffer));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << hash;
  return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knockoff-based variable selection with exchangeability diagnostics", "knockforge"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a smoothed Gaussian design and response");
  add_common(simulate, sim.common);
  simulate->add_option("--n", sim.n, "Number of samples");
  simulate->add_option("--shape", sim.shape, "Tensor shape a,b,c");
  simulate->add_option("--kernel-width", sim.width, "Smoothing kernel width");
  simulate->add_option("--sparsity", sim.sparsity, "Fraction of non-null variables");
  simulate->add_option("--snr", sim.snr, "Signal-to-noise ratio");
  simulate->add_flag("--standardize", sim.standardize, "Rescale columns to unit sd after smoothing");
  simulate->add_option("--out-dir", sim.out_dir, "Output directory")->required();

  KnockoffArgs ko;
  auto* knockoffs = app.add_subcommand("knockoffs", "Generate knockoffs for a design CSV");
  add_common(knockoffs, ko.common);
  knockoffs->add_option("--design", ko.design, "Design CSV")->required();
  knockoffs->add_option("--method", ko.method, "gaussian, sequential, parallel or crossfit");
  knockoffs->add_option("--cov", ko.cov, "empirical, lw, glasso or oracle (gaussian only)");
  knockoffs->add_option("--oracle-sigma", ko.oracle_sigma, "Covariance CSV for --cov oracle");
  knockoffs->add_option("--alpha", ko.alpha, "Fixed graphical lasso penalty");
  knockoffs->add_option("--folds", ko.folds, "Folds for crossfit");
  knockoffs->add_flag("--shared-permutation", ko.shared_permutation, "One residual permutation for all columns");
  knockoffs->add_option("--lambda-fraction", ko.lambda_fraction, "Per-column lasso penalty as a fraction of lambda_max");
  knockoffs->add_option("--shuffle-pairings", ko.shuffle, "Fraction of rows to mispair after generation");
  knockoffs->add_option("--out", ko.out, "Knockoff CSV")->required();

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Knockoff selection at level q");
  add_common(select, sel.common);
  select->add_option("--design", sel.design, "Design CSV")->required();
  select->add_option("--knockoffs", sel.knockoffs, "Knockoff CSV")->required();
  select->add_option("--response", sel.response, "Response CSV")->required();
  select->add_option("--q", sel.q, "Target FDR level");
  select->add_option("--lambda", sel.lambda, "max100 (default), cv or a positive value");
  select->add_flag("--emit-pi-only", sel.pi_only, "Report pi statistics and their BH selection");
  select->add_option("--out", sel.out, "Report JSON (default stdout)");

  DiagnoseArgs diag;
  auto* diagnose = app.add_subcommand("diagnose", "Exchangeability diagnostics");
  diagnose->require_subcommand(1);
  auto* c2st_cmd = diagnose->add_subcommand("c2st", "Classifier two-sample test");
  auto* pairing_cmd = diagnose->add_subcommand("pairing", "Optimal-assignment pairing check");
  for (auto* sub : {c2st_cmd, pairing_cmd}) {
    add_common(sub, diag.common);
    sub->add_option("--design", diag.design, "Design CSV")->required();
    sub->add_option("--knockoffs", diag.knockoffs, "Knockoff CSV")->required();
    sub->add_option("--out", diag.out, "Report JSON (default stdout)");
  }
  c2st_cmd->add_option("--folds", diag.folds, "Cross-validation folds");
  c2st_cmd->add_option("--l2", diag.l2, "Classifier L2 penalty");
  c2st_cmd->add_option("--alpha", diag.alpha, "p-value threshold for a violation");
  c2st_cmd->add_option("--split", diag.split, "split (half X rows, half knockoff rows) or all");
  pairing_cmd->add_option("--threshold", diag.threshold, "Identity fraction below which pairs are flagged");
  pairing_cmd->add_option("--cap", diag.cap, "Maximum rows for the assignment");
  pairing_cmd->add_flag("--subsample", diag.subsample, "Subsample rows above the cap");

  BenchmarkArgs bench;
  auto* benchmark = app.add_subcommand("benchmark", "Simulation benchmark");
  add_common(benchmark, bench.common);
  benchmark->add_option("--config", bench.config, "Key-value config file");
  benchmark->add_option("--runs", bench.runs, "Runs per setting");
  benchmark->add_option("--n", bench.n, "Samples");
  benchmark->add_option("--shape", bench.shape, "Tensor shape a,b,c");
  benchmark->add_option("--methods", bench.methods, "Comma-separated methods");
  benchmark->add_option("--cov", bench.covariances, "Comma-separated covariance options for gaussian");
  benchmark->add_option("--w-sweep", bench.w_sweep, "Comma-separated kernel widths");
  benchmark->add_option("--lambda", bench.lambda, "LCD penalty: max100 (default), cv or a value");
  benchmark->add_flag("--compare-wallclock", bench.compare_wallclock, "Time sequential vs parallel generation");
  benchmark->add_option("--out-dir", bench.out_dir, "Output directory");

  std::vector<const char*> argv;
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*simulate) return cmd_simulate(sim, args, out);
    if (*knockoffs) return cmd_knockoffs(ko, args, out);
    if (*select) return cmd_select(sel, args, out);
    if (*c2st_cmd) return cmd_diagnose(diag, false, args, out);
    if (*pairing_cmd) return cmd_diagnose(diag, true, args, out);
    if (*benchmark) return cmd_benchmark(bench, args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace knockforge::cli
