#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace hbt {

struct PcaModel {
  Eigen::VectorXd mean;               // D
  Eigen::MatrixXd basis;              // D x d, orthonormal columns
  Eigen::VectorXd explained_variance;  // d, non-increasing
  double total_variance = 0.0;
};

/// Top-d eigenvectors of the sample covariance (divisor rows - 1). Each basis
/// vector is signed so that its largest-magnitude component is positive.
/// Throws std::invalid_argument unless 1 <= d <= min(D, rows - 1).
PcaModel pca_fit(const Eigen::MatrixXd& rows, std::size_t d);

/// (rows - mean) * basis.
Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& rows);
Eigen::MatrixXd pca_reconstruct(const PcaModel& model, const Eigen::MatrixXd& reduced);

}  // namespace hbt
