#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "knockforge/linalg.hpp"
#include "knockforge/regression.hpp"

namespace knockforge {

// ---------------------------------------------------------------------------
// Classifier two-sample test
// ---------------------------------------------------------------------------

struct C2stDataset {
  Matrix z;                 // 2n×p: X rows, then X̃ rows
  std::vector<int> labels;  // 0 for X, 1 for X̃
};

C2stDataset build_c2st_dataset(const Matrix& x, const Matrix& x_tilde);

struct C2stOptions {
  // kSplitRows: rows are shuffled and halved; the first half contributes its
  // original row, the second half its knockoff row. kAllRows: all 2n rows,
  // with each (xⁱ, x̃ⁱ) pair kept in the same fold.
  enum class Design { kSplitRows, kAllRows };
  Design design = Design::kSplitRows;
  int folds = 5;
  double l2_penalty = 1.0;
  double alpha = 0.01;  // p-value below alpha → violation
  std::size_t workers = 1;
  ClassifierOptions classifier;
};

enum class C2stVerdict { kConsistent, kViolation };
std::string to_string(C2stVerdict verdict);

struct C2stReport {
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  std::size_t n_test_total = 0;
  std::size_t correct_total = 0;
  double p_value = 1.0;
  C2stVerdict verdict = C2stVerdict::kConsistent;
  std::vector<std::string> log;
};

// Stratified K-fold accuracy of the linear classifier separating X rows from
// X̃ rows. Rows are sorted lexicographically before the seeded split, so the
// report does not depend on the input row order.
C2stReport c2st(const Matrix& x, const Matrix& x_tilde, std::uint64_t seed,
                const C2stOptions& options = {});

C2stOptions::Design parse_c2st_design(const std::string& text);

// P[Binomial(n, 1/2) ≥ correct].
double c2st_pvalue(std::size_t correct, std::size_t n);

// ---------------------------------------------------------------------------
// Pairing check
// ---------------------------------------------------------------------------

// Minimum-cost perfect assignment; result[i] is the column assigned to row i.
std::vector<std::size_t> hungarian(const Matrix& cost);

struct PairingOptions {
  double threshold = 0.99;  // identity fraction below this → mispairing
  std::size_t cap = 5000;
  // Above the cap, evaluate a uniform subsample of `cap` rows instead of
  // failing.
  bool subsample = false;
  std::uint64_t seed = 0;
};

enum class PairingVerdict { kPaired, kMispairing };
std::string to_string(PairingVerdict verdict);

struct PairingReport {
  std::vector<std::size_t> assignment;
  std::vector<std::size_t> rows;  // original row index of each assignment slot
  double identity_fraction = 0.0;
  double total_cost = 0.0;
  PairingVerdict verdict = PairingVerdict::kPaired;
};

// Squared Euclidean cost between rows of X and rows of X̃ after standardizing
// columns with the pooled moments of both matrices.
Matrix pairing_cost(const Matrix& x, const Matrix& x_tilde);

PairingReport pairing_check(const Matrix& x, const Matrix& x_tilde,
                            const PairingOptions& options = {});

}  // namespace knockforge
