#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hbt/dataset.hpp"

namespace hbt {

/// Raised for numerical failures: a non-positive-definite precision, a
/// singular scatter matrix, an optimizer that cannot make progress.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Symmetric packed storage. Upper triangle, row-major: (0,0) (0,1) .. (0,d-1)
// (1,1) .. (d-1,d-1).

std::size_t packed_size(std::size_t dim);
std::size_t packed_index(std::size_t row, std::size_t col, std::size_t dim);
/// Recovers d from a packed length; throws when the length is not triangular.
std::size_t packed_dim(std::size_t packed_len);
Eigen::VectorXd pack_upper(const Eigen::MatrixXd& sym);
Eigen::MatrixXd unpack_upper(const Eigen::Ref<const Eigen::VectorXd>& packed,
                             std::size_t dim);
/// Node-local mask over packed entries that are on the diagonal.
std::vector<bool> packed_diagonal_mask(std::size_t dim);

// ---------------------------------------------------------------------------
// Gaussian in precision parametrization.

struct GaussianParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;  // symmetric positive definite

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

struct GaussianStats {
  double count = 0.0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd scatter;  // sum of x x^T

  static GaussianStats zero(std::size_t dim);
  std::size_t dim() const { return static_cast<std::size_t>(sum.size()); }
  GaussianStats& operator+=(const GaussianStats& other);
};

GaussianStats gaussian_stats(const Eigen::MatrixXd& rows);
/// Throws std::invalid_argument on ragged rows.
GaussianStats gaussian_stats(const std::vector<std::vector<double>>& rows, std::size_t dim);

/// Sum of log N(x | mean, precision^-1) over the instances summarized by
/// stats, including the -(M d / 2) log 2 pi normalizer.
double gaussian_loglik(const GaussianStats& stats, const GaussianParams& params);

struct GaussianGradient {
  Eigen::VectorXd mean;
  Eigen::VectorXd precision;  // packed, off-diagonal partials doubled
};

GaussianGradient gaussian_grad(const GaussianStats& stats, const GaussianParams& params);

/// Ridge augmentation: scatter += count * alpha * I, which makes the
/// regularized ML precision inv(empirical cov + alpha I) the stationary point.
GaussianStats apply_ridge(const GaussianStats& stats, double alpha);

/// Closed-form ridge-regularized ML estimate: mean = sum / M and
/// precision = inv(biased empirical covariance + alpha I).
GaussianParams gaussian_ml(const GaussianStats& stats, double alpha);

/// Throws NumericalError if the precision is not positive definite.
double log_det_spd(const Eigen::MatrixXd& m);
bool is_positive_definite(const Eigen::MatrixXd& m);

// ---------------------------------------------------------------------------
// Log-space multinomial.

struct MultinomialParams {
  Eigen::VectorXd logits;
};

struct CountStats {
  Eigen::VectorXd counts;
};

CountStats count_stats(const std::vector<SparseDoc>& docs, std::size_t vocab);
CountStats doc_counts(const SparseDoc& doc, std::size_t vocab);

/// Stable log(sum(exp(v))); -inf entries are ignored.
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& v);
/// Gauge-fixed logits: logits - log_sum_exp(logits).
Eigen::VectorXd log_normalize(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// sum_i (counts_i + alpha) (theta_i - logsumexp(theta)).
double multinomial_loglik(const CountStats& counts, const MultinomialParams& params,
                          double alpha);
/// (counts_i + alpha) - (sum_j counts_j + alpha V) softmax(theta)_i.
Eigen::VectorXd multinomial_grad(const CountStats& counts, const MultinomialParams& params,
                                 double alpha);

/// Log-probability of a bag of words: sum_i d_i (theta_i - logsumexp(theta)).
/// Words with zero count never contribute, so -inf logits are only fatal for
/// words that occur.
double nb_doc_loglik(const CountStats& doc, const MultinomialParams& params);
double nb_doc_loglik(const SparseDoc& doc, const Eigen::VectorXd& log_probs);

/// Smoothed log frequencies log((n_i + alpha) / (N + alpha V)). With
/// alpha = 0, zero counts map to -inf.
MultinomialParams multinomial_ml(const CountStats& counts, double alpha);

}  // namespace hbt
