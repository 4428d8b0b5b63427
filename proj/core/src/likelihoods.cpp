#include "hbt/likelihoods.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

namespace hbt {

namespace {
using Eigen::Index;
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::LLT<Eigen::MatrixXd> factor_or_throw(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError("precision matrix is not positive definite");
  return llt;
}

/// sum_m (x_m - mu)(x_m - mu)^T from sufficient statistics.
Eigen::MatrixXd centered_scatter(const GaussianStats& s, const Eigen::VectorXd& mu) {
  Eigen::MatrixXd c = s.scatter - s.sum * mu.transpose() - mu * s.sum.transpose() +
                      s.count * mu * mu.transpose();
  return 0.5 * (c + c.transpose());
}

void check_dims(const GaussianStats& s, const GaussianParams& p) {
  if (s.dim() != p.dim() || p.precision.rows() != p.mean.size() ||
      p.precision.cols() != p.mean.size())
    throw std::invalid_argument("gaussian: dimension mismatch between stats and params");
}

void check_dims(const Eigen::VectorXd& counts, const Eigen::VectorXd& logits) {
  if (counts.size() != logits.size())
    throw std::invalid_argument("multinomial: dimension mismatch between counts and logits");
}
}  // namespace

std::size_t packed_size(std::size_t dim) { return dim * (dim + 1) / 2; }

std::size_t packed_index(std::size_t row, std::size_t col, std::size_t dim) {
  if (row > col) std::swap(row, col);
  // Rows before `row` hold dim, dim-1, ..., dim-row+1 entries.
  return row * dim - row * (row - 1) / 2 + (col - row);
}

std::size_t packed_dim(std::size_t packed_len) {
  std::size_t d = 0;
  while (packed_size(d) < packed_len) ++d;
  if (packed_size(d) != packed_len)
    throw std::invalid_argument("packed length is not a triangular number");
  return d;
}

Eigen::VectorXd pack_upper(const Eigen::MatrixXd& sym) {
  const auto d = static_cast<std::size_t>(sym.rows());
  Eigen::VectorXd out(static_cast<Index>(packed_size(d)));
  Index k = 0;
  for (Index i = 0; i < sym.rows(); ++i)
    for (Index j = i; j < sym.cols(); ++j) out[k++] = sym(i, j);
  return out;
}

Eigen::MatrixXd unpack_upper(const Eigen::Ref<const Eigen::VectorXd>& packed,
                             std::size_t dim) {
  if (static_cast<std::size_t>(packed.size()) != packed_size(dim))
    throw std::invalid_argument("unpack_upper: packed length does not match dimension");
  const auto d = static_cast<Index>(dim);
  Eigen::MatrixXd out(d, d);
  Index k = 0;
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) {
      out(i, j) = packed[k];
      out(j, i) = packed[k];
      ++k;
    }
  return out;
}

std::vector<bool> packed_diagonal_mask(std::size_t dim) {
  std::vector<bool> mask(packed_size(dim), false);
  for (std::size_t i = 0; i < dim; ++i) mask[packed_index(i, i, dim)] = true;
  return mask;
}

GaussianStats GaussianStats::zero(std::size_t dim) {
  const auto d = static_cast<Index>(dim);
  return GaussianStats{0.0, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
}

GaussianStats& GaussianStats::operator+=(const GaussianStats& other) {
  count += other.count;
  sum += other.sum;
  scatter += other.scatter;
  return *this;
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& rows) {
  GaussianStats s = GaussianStats::zero(static_cast<std::size_t>(rows.cols()));
  s.count = static_cast<double>(rows.rows());
  if (rows.rows() == 0) return s;
  if (!rows.allFinite()) throw std::invalid_argument("gaussian_stats: non-finite entry");
  s.sum = rows.colwise().sum().transpose();
  s.scatter = rows.transpose() * rows;
  return s;
}

GaussianStats gaussian_stats(const std::vector<std::vector<double>>& rows, std::size_t dim) {
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim)
      throw std::invalid_argument("gaussian_stats: ragged row " + std::to_string(r) +
                                  " (expected " + std::to_string(dim) + " columns, got " +
                                  std::to_string(rows[r].size()) + ")");
    for (std::size_t c = 0; c < dim; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return gaussian_stats(m);
}

double log_det_spd(const Eigen::MatrixXd& m) {
  const auto llt = factor_or_throw(m);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

double gaussian_loglik(const GaussianStats& stats, const GaussianParams& params) {
  check_dims(stats, params);
  if (stats.count == 0.0) return 0.0;
  const double logdet = log_det_spd(params.precision);
  const Eigen::MatrixXd c = centered_scatter(stats, params.mean);
  const double quad = params.precision.cwiseProduct(c).sum();
  const double d = static_cast<double>(params.dim());
  return -0.5 * quad + 0.5 * stats.count * logdet -
         0.5 * stats.count * d * std::log(2.0 * std::numbers::pi);
}

GaussianGradient gaussian_grad(const GaussianStats& stats, const GaussianParams& params) {
  check_dims(stats, params);
  const std::size_t d = params.dim();
  GaussianGradient g{Eigen::VectorXd::Zero(static_cast<Index>(d)),
                     Eigen::VectorXd::Zero(static_cast<Index>(packed_size(d)))};
  if (stats.count == 0.0) return g;
  const auto llt = factor_or_throw(params.precision);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(params.precision.rows(),
                                                                  params.precision.cols()));
  g.mean = params.precision * (stats.sum - stats.count * params.mean);
  const Eigen::MatrixXd full =
      -0.5 * centered_scatter(stats, params.mean) + 0.5 * stats.count * cov;
  Index k = 0;
  for (Index i = 0; i < full.rows(); ++i)
    for (Index j = i; j < full.cols(); ++j)
      g.precision[k++] = i == j ? full(i, i) : full(i, j) + full(j, i);
  return g;
}

GaussianStats apply_ridge(const GaussianStats& stats, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("apply_ridge: alpha must be nonnegative");
  GaussianStats out = stats;
  if (alpha > 0.0 && stats.count > 0.0)
    out.scatter.diagonal().array() += stats.count * alpha;
  return out;
}

GaussianParams gaussian_ml(const GaussianStats& stats, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("gaussian_ml: alpha must be nonnegative");
  if (stats.count <= 0.0) throw NumericalError("gaussian_ml: no instances");
  GaussianParams p;
  p.mean = stats.sum / stats.count;
  Eigen::MatrixXd cov = centered_scatter(stats, p.mean) / stats.count;
  cov.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !is_positive_definite(cov))
    throw NumericalError("gaussian_ml: singular covariance (increase alpha or add data)");
  // A rank-deficient covariance can still factor with round-off pivots; reject
  // those through the reciprocal condition of the factor.
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if (diag.minCoeff() <= 1e-7 * diag.maxCoeff())
    throw NumericalError("gaussian_ml: singular covariance (increase alpha or add data)");
  p.precision = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  p.precision = 0.5 * (p.precision + p.precision.transpose()).eval();
  return p;
}

CountStats count_stats(const std::vector<SparseDoc>& docs, std::size_t vocab) {
  CountStats s{Eigen::VectorXd::Zero(static_cast<Index>(vocab))};
  for (const auto& doc : docs)
    for (std::size_t k = 0; k < doc.ids.size(); ++k) {
      if (doc.ids[k] >= vocab)
        throw std::invalid_argument("count_stats: word id exceeds vocabulary");
      s.counts[doc.ids[k]] += doc.counts[k];
    }
  return s;
}

CountStats doc_counts(const SparseDoc& doc, std::size_t vocab) {
  return CountStats{doc.dense(vocab)};
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return -kInf;
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += std::exp(v[i] - mx);
  return mx + std::log(acc);
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) throw NumericalError("softmax: no finite logit");
  const Eigen::VectorXd e = (v.array() - m).exp().matrix();
  return e / e.sum();
}

Eigen::VectorXd log_normalize(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  return (logits.array() - log_sum_exp(logits)).matrix();
}

double multinomial_loglik(const CountStats& counts, const MultinomialParams& params,
                          double alpha) {
  check_dims(counts.counts, params.logits);
  if (!(alpha >= 0.0)) throw std::invalid_argument("multinomial: alpha must be nonnegative");
  const double lse = log_sum_exp(params.logits);
  double total = 0.0;
  for (Index i = 0; i < params.logits.size(); ++i) {
    const double w = counts.counts[i] + alpha;
    if (w != 0.0) total += w * (params.logits[i] - lse);
  }
  return total;
}

Eigen::VectorXd multinomial_grad(const CountStats& counts, const MultinomialParams& params,
                                 double alpha) {
  check_dims(counts.counts, params.logits);
  if (!(alpha >= 0.0)) throw std::invalid_argument("multinomial: alpha must be nonnegative");
  const double vocab = static_cast<double>(params.logits.size());
  const double total = counts.counts.sum() + alpha * vocab;
  return (counts.counts.array() + alpha).matrix() - total * softmax(params.logits);
}

double nb_doc_loglik(const CountStats& doc, const MultinomialParams& params) {
  return multinomial_loglik(doc, params, 0.0);
}

double nb_doc_loglik(const SparseDoc& doc, const Eigen::VectorXd& log_probs) {
  double total = 0.0;
  for (std::size_t k = 0; k < doc.ids.size(); ++k) {
    if (doc.ids[k] >= static_cast<std::size_t>(log_probs.size()))
      throw std::invalid_argument("nb_doc_loglik: word id exceeds vocabulary");
    if (doc.counts[k] != 0.0) total += doc.counts[k] * log_probs[doc.ids[k]];
  }
  return total;
}

MultinomialParams multinomial_ml(const CountStats& counts, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("multinomial_ml: alpha must be nonnegative");
  const double vocab = static_cast<double>(counts.counts.size());
  const double total = counts.counts.sum() + alpha * vocab;
  if (total <= 0.0) throw NumericalError("multinomial_ml: no counts and no smoothing");
  MultinomialParams p{Eigen::VectorXd(counts.counts.size())};
  for (Index i = 0; i < counts.counts.size(); ++i) {
    const double w = counts.counts[i] + alpha;
    p.logits[i] = w > 0.0 ? std::log(w / total) : -kInf;
  }
  return p;
}

}  // namespace hbt
