#include "knockforge/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "knockforge/errors.hpp"
#include "knockforge/parallel.hpp"
#include "knockforge/random.hpp"

namespace knockforge {

namespace {

void check_pair(const Matrix& x, const Matrix& x_tilde, const char* what) {
  if (x.rows() != x_tilde.rows() || x.cols() != x_tilde.cols()) {
    std::ostringstream msg;
    msg << what << ": shape mismatch (" << x.rows() << "x" << x.cols() << " vs "
        << x_tilde.rows() << "x" << x_tilde.cols() << ")";
    throw ContractViolation(msg.str());
  }
}

bool row_less(const Matrix& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) < m(b, j)) return true;
    if (m(b, j) < m(a, j)) return false;
  }
  return false;
}

// Row indices ordered lexicographically by the X row, then the X̃ row.
std::vector<std::size_t> canonical_order(const Matrix& x, const Matrix& x_tilde) {
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    if (row_less(x, ia, ib)) return true;
    if (row_less(x, ib, ia)) return false;
    return row_less(x_tilde, ia, ib);
  });
  return order;
}

struct Sample {
  Eigen::Index row;
  bool knockoff;
  int fold;
};

std::vector<Sample> assign_folds(const std::vector<std::size_t>& order, int folds,
                                 C2stOptions::Design design, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::size_t> perm = random_permutation(order.size(), rng);
  std::vector<Sample> samples;
  if (design == C2stOptions::Design::kAllRows) {
    for (std::size_t r = 0; r < perm.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(order[perm[r]]);
      const int fold = static_cast<int>(r % static_cast<std::size_t>(folds));
      samples.push_back({row, false, fold});
      samples.push_back({row, true, fold});
    }
    return samples;
  }
  const std::size_t half = (perm.size() + 1) / 2;
  for (std::size_t r = 0; r < perm.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(order[perm[r]]);
    const bool knockoff = r >= half;
    const std::size_t position = knockoff ? r - half : r;
    samples.push_back({row, knockoff, static_cast<int>(position % static_cast<std::size_t>(folds))});
  }
  return samples;
}

bool training_has_both_classes(const std::vector<Sample>& samples, int folds) {
  for (int k = 0; k < folds; ++k) {
    bool zero = false;
    bool one = false;
    for (const Sample& s : samples) {
      if (s.fold == k) continue;
      (s.knockoff ? one : zero) = true;
    }
    if (!(zero && one)) return false;
  }
  return true;
}

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

C2stDataset build_c2st_dataset(const Matrix& x, const Matrix& x_tilde) {
  check_pair(x, x_tilde, "build_c2st_dataset");
  C2stDataset out;
  out.z.resize(2 * x.rows(), x.cols());
  out.z << x, x_tilde;
  out.labels.assign(static_cast<std::size_t>(x.rows()), 0);
  out.labels.resize(static_cast<std::size_t>(2 * x.rows()), 1);
  return out;
}

std::string to_string(C2stVerdict verdict) {
  return verdict == C2stVerdict::kConsistent ? "consistent_with_exchangeability"
                                             : "violation_detected";
}

std::string to_string(PairingVerdict verdict) {
  return verdict == PairingVerdict::kPaired ? "paired" : "mispairing_detected";
}

C2stOptions::Design parse_c2st_design(const std::string& text) {
  if (text == "split") return C2stOptions::Design::kSplitRows;
  if (text == "all") return C2stOptions::Design::kAllRows;
  throw UsageError("c2st design must be 'split' or 'all', got '" + text + "'");
}

double c2st_pvalue(std::size_t correct, std::size_t n) {
  if (correct > n) throw ContractViolation("c2st_pvalue: correct exceeds n");
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  double log_tail = -std::numeric_limits<double>::infinity();
  for (std::size_t k = correct; k <= n; ++k) {
    const double log_choose = lg_n1 - std::lgamma(static_cast<double>(k) + 1.0) -
                              std::lgamma(static_cast<double>(n - k) + 1.0);
    log_tail = log_add(log_tail, log_choose + log_half_n);
  }
  return std::min(1.0, std::exp(log_tail));
}

C2stReport c2st(const Matrix& x, const Matrix& x_tilde, std::uint64_t seed,
                const C2stOptions& options) {
  check_pair(x, x_tilde, "c2st");
  const int folds = options.folds;
  if (folds < 2) throw ContractViolation("c2st: need at least 2 folds");
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t per_class = options.design == C2stOptions::Design::kAllRows ? n : n / 2;
  if (per_class < static_cast<std::size_t>(folds)) {
    throw ContractViolation("c2st: too few rows for the requested folds");
  }

  C2stReport report;
  const std::vector<std::size_t> order = canonical_order(x, x_tilde);
  std::vector<Sample> samples;
  for (std::uint64_t attempt = 0;; ++attempt) {
    samples = assign_folds(order, folds, options.design, derive_seed(seed, Stream::kC2stSplit, attempt));
    if (training_has_both_classes(samples, folds)) break;
    report.log.push_back("c2st: training fold with a single class, resplit with sub-seed " +
                         std::to_string(attempt + 1));
    if (attempt > 100) throw ContractViolation("c2st: could not build stratified folds");
  }

  std::vector<std::size_t> correct(static_cast<std::size_t>(folds), 0);
  std::vector<std::size_t> tested(static_cast<std::size_t>(folds), 0);
  parallel_for(static_cast<std::size_t>(folds), options.workers, [&](std::size_t task) {
    const int k = static_cast<int>(task);
    std::vector<const Sample*> train;
    std::vector<const Sample*> test;
    for (const Sample& s : samples) (s.fold == k ? test : train).push_back(&s);
    auto gather = [&](const std::vector<const Sample*>& set, Matrix& z, std::vector<int>& labels) {
      z.resize(static_cast<Eigen::Index>(set.size()), x.cols());
      labels.resize(set.size());
      for (std::size_t i = 0; i < set.size(); ++i) {
        const Sample& s = *set[i];
        z.row(static_cast<Eigen::Index>(i)) = s.knockoff ? x_tilde.row(s.row) : x.row(s.row);
        labels[i] = s.knockoff ? 1 : 0;
      }
    };
    Matrix z_train;
    Matrix z_test;
    std::vector<int> l_train;
    std::vector<int> l_test;
    gather(train, z_train, l_train);
    gather(test, z_test, l_test);
    const LinearClassifierFit fit =
        classifier_fit(z_train, l_train, options.l2_penalty, options.classifier);
    const std::vector<int> predicted = classifier_predict(fit, z_test);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == l_test[i];
    correct[task] = hits;
    tested[task] = l_test.size();
  });

  double sum = 0.0;
  for (int k = 0; k < folds; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double accuracy = static_cast<double>(correct[kk]) / static_cast<double>(tested[kk]);
    report.fold_accuracies.push_back(accuracy);
    sum += accuracy;
    report.correct_total += correct[kk];
    report.n_test_total += tested[kk];
  }
  report.mean_accuracy = sum / static_cast<double>(folds);
  report.p_value = c2st_pvalue(report.correct_total, report.n_test_total);
  report.verdict = report.p_value < options.alpha ? C2stVerdict::kViolation : C2stVerdict::kConsistent;
  return report;
}

std::vector<std::size_t> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ContractViolation("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw ContractViolation("hungarian: cost matrix has non-finite entries");
  const auto n = static_cast<std::size_t>(cost.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with row/column potentials; index 0 is a
  // sentinel column.
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0);  // column -> row
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (reduced < minv[j]) {
          minv[j] = reduced;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

Matrix pairing_cost(const Matrix& x, const Matrix& x_tilde) {
  check_pair(x, x_tilde, "pairing_cost");
  Matrix pooled(2 * x.rows(), x.cols());
  pooled << x, x_tilde;
  const ColumnMoments moments = column_moments(pooled);
  Vector scale(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) scale(j) = moments.sd(j) > 0.0 ? 1.0 / moments.sd(j) : 0.0;
  const Matrix a = (x.rowwise() - moments.mean.transpose()) * scale.asDiagonal();
  const Matrix b = (x_tilde.rowwise() - moments.mean.transpose()) * scale.asDiagonal();
  const Vector a2 = a.rowwise().squaredNorm();
  const Vector b2 = b.rowwise().squaredNorm();
  Matrix cost = (-2.0 * a * b.transpose()).eval();
  cost.colwise() += a2;
  cost.rowwise() += b2.transpose();
  return cost.cwiseMax(0.0);
}

PairingReport pairing_check(const Matrix& x, const Matrix& x_tilde, const PairingOptions& options) {
  check_pair(x, x_tilde, "pairing_check");
  const auto n = static_cast<std::size_t>(x.rows());
  PairingReport report;
  report.rows.resize(n);
  std::iota(report.rows.begin(), report.rows.end(), std::size_t{0});
  if (n > options.cap) {
    if (!options.subsample) {
      std::ostringstream msg;
      msg << "pairing_check: " << n << " rows exceed the cap of " << options.cap
          << "; enable subsampling to check a uniform subset";
      throw ContractViolation(msg.str());
    }
    Rng rng(derive_seed(options.seed, Stream::kSubsample));
    std::vector<std::size_t> perm = random_permutation(n, rng);
    perm.resize(options.cap);
    std::sort(perm.begin(), perm.end());
    report.rows = perm;
  }
  const auto m = static_cast<Eigen::Index>(report.rows.size());
  Matrix xs(m, x.cols());
  Matrix xts(m, x.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    xs.row(i) = x.row(static_cast<Eigen::Index>(report.rows[static_cast<std::size_t>(i)]));
    xts.row(i) = x_tilde.row(static_cast<Eigen::Index>(report.rows[static_cast<std::size_t>(i)]));
  }
  const Matrix cost = pairing_cost(xs, xts);
  report.assignment = hungarian(cost);
  std::size_t fixed = 0;
  for (std::size_t i = 0; i < report.assignment.size(); ++i) {
    fixed += report.assignment[i] == i;
    report.total_cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(report.assignment[i]));
  }
  report.identity_fraction =
      report.assignment.empty() ? 1.0 : static_cast<double>(fixed) / static_cast<double>(report.assignment.size());
  report.verdict = report.identity_fraction < options.threshold ? PairingVerdict::kMispairing
                                                                : PairingVerdict::kPaired;
  return report;
}

}  // namespace knockforge
