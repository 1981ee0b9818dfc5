#include "knockforge/linalg.hpp"

#include <cmath>

namespace knockforge {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

ColumnMoments column_moments(const Matrix& x) {
  ColumnMoments m;
  const double n = static_cast<double>(x.rows());
  m.mean = x.colwise().mean().transpose();
  m.sd.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    m.sd(j) = std::sqrt((x.col(j).array() - m.mean(j)).square().sum() / n);
  }
  return m;
}

Matrix standardize_columns(const Matrix& x) {
  const ColumnMoments m = column_moments(x);
  Matrix out = x.rowwise() - m.mean.transpose();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (m.sd(j) > 0.0) out.col(j) /= m.sd(j);
  }
  return out;
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

}  // namespace knockforge
