#pragma once

#include <Eigen/Dense>

namespace knockforge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// (A + Aᵀ)/2.
Matrix symmetrize(const Matrix& a);

// Smallest eigenvalue of a symmetric matrix (self-adjoint solver).
double min_eigenvalue(const Matrix& symmetric);

// Column means and population (1/n) standard deviations.
struct ColumnMoments {
  Vector mean;
  Vector sd;
};
ColumnMoments column_moments(const Matrix& x);

// Columns centered and scaled to unit population sd; zero-sd columns are left
// centered (all zeros).
Matrix standardize_columns(const Matrix& x);

double soft_threshold(double value, double threshold);

}  // namespace knockforge
