#include "hbt/pca.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace hbt {

PcaModel pca_fit(const Eigen::MatrixXd& rows, std::size_t d) {
  const auto n = static_cast<std::size_t>(rows.rows());
  const auto D = static_cast<std::size_t>(rows.cols());
  if (n < 2 || d == 0 || d > D || d > n - 1)
    throw std::invalid_argument("pca_fit: target dimension " + std::to_string(d) +
                                " must be in [1, min(D, rows - 1)]");

  PcaModel m;
  m.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - m.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  m.total_variance = cov.trace();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigensolver failed");

  // Eigen returns ascending eigenvalues.
  const auto di = static_cast<Eigen::Index>(d);
  m.basis.resize(static_cast<Eigen::Index>(D), di);
  m.explained_variance.resize(di);
  for (Eigen::Index k = 0; k < di; ++k) {
    const Eigen::Index src = static_cast<Eigen::Index>(D) - 1 - k;
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    m.basis.col(k) = v;
    m.explained_variance[k] = std::max(0.0, eig.eigenvalues()[src]);
  }
  return m;
}

Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.mean.size())
    throw std::invalid_argument("pca_project: column count does not match the model");
  return (rows.rowwise() - model.mean.transpose()) * model.basis;
}

Eigen::MatrixXd pca_reconstruct(const PcaModel& model, const Eigen::MatrixXd& reduced) {
  if (reduced.cols() != model.basis.cols())
    throw std::invalid_argument("pca_reconstruct: column count does not match the model");
  return (reduced * model.basis.transpose()).rowwise() + model.mean.transpose();
}

}  // namespace hbt
