#include "hbt/transfer_objective.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace hbt {

namespace {
using Eigen::Index;

TyingMask resolve_mask(const Hierarchy& h, const ObjectiveConfig& config, Family family,
                       std::size_t dim) {
  if (!config.mask.empty()) {
    if (config.mask.node_count() != h.size())
      throw std::invalid_argument("tying mask does not match hierarchy size");
    return config.mask;
  }
  return TyingMask::for_family(h, family, dim);
}
}  // namespace

void ObjectiveConfig::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("objective: beta must be >= 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("objective: alpha must be >= 0");
  divergence.validate();
}

GaussianParams gaussian_params(const ParamState& state, NodeId node) {
  const std::size_t d = state.index.groups().at(0).size;
  GaussianParams p;
  p.mean = state.group_block(node, 0);
  p.precision = unpack_upper(state.group_block(node, 1), d);
  return p;
}

MultinomialParams multinomial_params(const ParamState& state, NodeId node) {
  return MultinomialParams{state.group_block(node, 0)};
}

void set_gaussian_params(ParamState& state, NodeId node, const GaussianParams& p) {
  const Block m = state.index.block(node, 0);
  const Block k = state.index.block(node, 1);
  state.values.segment(static_cast<Index>(m.offset), static_cast<Index>(m.size)) = p.mean;
  state.values.segment(static_cast<Index>(k.offset), static_cast<Index>(k.size)) =
      pack_upper(p.precision);
}

void set_multinomial_params(ParamState& state, NodeId node, const MultinomialParams& p) {
  const Block b = state.index.block(node, 0);
  state.values.segment(static_cast<Index>(b.offset), static_cast<Index>(b.size)) = p.logits;
}

double transfer_penalty(const ParamState& state, const Hierarchy& h,
                        const DotCoefficients& dot, const ObjectiveConfig& config) {
  config.validate();
  dot.validate();
  const std::size_t nd = state.index.node_dim();
  double total = 0.0;
  for (auto [child, parent] : h.edges()) {
    const EdgeDot& e = dot.edge_for(child);
    const auto c = state.node_block(child);
    const auto p = state.node_block(parent);
    for (std::size_t local = 0; local < nd; ++local) {
      const bool tied = config.mask.empty() ? e.slot.at(local) >= 0
                                            : config.mask.tied(child, local);
      if (!tied) continue;
      const int s = e.slot.at(local);
      if (s < 0) throw std::invalid_argument("transfer_penalty: missing lambda");
      const auto li = static_cast<Index>(local);
      total += penalty(c[li] - p[li], config.divergence).value / e.lambda[s];
    }
  }
  return config.beta * total;
}

TransferObjective::TransferObjective(const Hierarchy& h, const HierarchyData& data,
                                     ObjectiveConfig config, DotCoefficients dot,
                                     std::optional<HyperpriorSpec> prior)
    : h_(&h),
      family_(data.family),
      dim_(data.dim),
      index_(layout(h, data.family, data.dim)),
      config_(std::move(config)),
      prior_(std::move(prior)) {
  config_.validate();
  data.require_leaf_data(h);
  config_.mask = resolve_mask(h, config_, family_, dim_);

  switch (config_.dot_mode) {
    case DotMode::none:
      dot_ = DotCoefficients::constant(h, index_, config_.mask, config_.granularity, 1.0);
      prior_.reset();
      break;
    case DotMode::fixed:
      dot_ = std::move(dot);
      prior_.reset();
      break;
    case DotMode::hyperprior:
      dot_ = std::move(dot);
      if (!prior_) prior_ = HyperpriorSpec::with_mean(dot_);
      prior_->validate();
      break;
  }
  dot_.validate();
  dot_.check_covers(config_.mask);

  gaussian_.resize(h.size());
  counts_.resize(h.size());
  for (NodeId n = 0; n < h.size(); ++n) {
    const Dataset* ds = data.find(n);
    if (!ds || ds->empty()) continue;
    if (family_ == Family::gaussian)
      gaussian_[n] = apply_ridge(gaussian_stats(ds->rows), config_.alpha);
    else
      counts_[n] = count_stats(ds->docs, dim_);
  }
}

std::size_t TransferObjective::free_dim() const {
  return theta_dim() + (optimizes_lambda() ? dot_.slot_count() : 0);
}

Eigen::VectorXd TransferObjective::pack(const Eigen::VectorXd& theta) const {
  return pack(theta, dot_);
}

Eigen::VectorXd TransferObjective::pack(const Eigen::VectorXd& theta,
                                        const DotCoefficients& dot) const {
  if (static_cast<std::size_t>(theta.size()) != theta_dim())
    throw std::invalid_argument("objective: parameter vector has the wrong length");
  if (!optimizes_lambda()) return theta;
  Eigen::VectorXd x(static_cast<Index>(free_dim()));
  x.head(theta.size()) = theta;
  x.tail(static_cast<Index>(dot.slot_count())) = dot.flatten().array().log().matrix();
  return x;
}

DotCoefficients TransferObjective::dot_at(const Eigen::VectorXd& x) const {
  if (!optimizes_lambda()) return dot_;
  DotCoefficients out = dot_;
  out.assign(x.tail(static_cast<Index>(dot_.slot_count())).array().exp().matrix());
  return out;
}

bool TransferObjective::feasible(const Eigen::VectorXd& x) const {
  if (!x.allFinite()) return false;
  if (family_ != Family::gaussian) return true;
  const std::size_t d = dim_;
  for (NodeId n = 0; n < h_->size(); ++n) {
    const Block k = index_.block(n, 1);
    const Eigen::MatrixXd prec =
        unpack_upper(x.segment(static_cast<Index>(k.offset), static_cast<Index>(k.size)), d);
    if (!is_positive_definite(prec)) return false;
  }
  return true;
}

double TransferObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  if (static_cast<std::size_t>(x.size()) != free_dim())
    throw std::invalid_argument("objective: free vector has the wrong length");
  const Index nd = static_cast<Index>(index_.node_dim());
  const Index ntheta = static_cast<Index>(theta_dim());
  if (grad) grad->setZero(x.size());

  // Lambdas in effect; in hyperprior mode they come from the log coordinates.
  Eigen::VectorXd lambda_flat = optimizes_lambda()
                                    ? x.tail(static_cast<Index>(dot_.slot_count())).array().exp().matrix()
                                    : dot_.flatten();

  double total = 0.0;

  // Data terms, node order.
  for (NodeId n = 0; n < h_->size(); ++n) {
    const Index off = static_cast<Index>(index_.node_offset(n));
    if (family_ == Family::gaussian) {
      if (!gaussian_[n]) continue;
      const Index d = static_cast<Index>(dim_);
      GaussianParams p;
      p.mean = x.segment(off, d);
      p.precision = unpack_upper(x.segment(off + d, nd - d), dim_);
      total -= gaussian_loglik(*gaussian_[n], p);
      if (grad) {
        const GaussianGradient g = gaussian_grad(*gaussian_[n], p);
        grad->segment(off, d) -= g.mean;
        grad->segment(off + d, nd - d) -= g.precision;
      }
    } else {
      if (!counts_[n]) continue;
      const MultinomialParams p{x.segment(off, nd)};
      total -= multinomial_loglik(*counts_[n], p, config_.alpha);
      if (grad) grad->segment(off, nd) -= multinomial_grad(*counts_[n], p, config_.alpha);
    }
  }

  // Edge penalties, edge order; per-slot divergence sums feed the lambda gradient.
  const double beta = config_.beta;
  Index slot_base = 0;
  Eigen::VectorXd slot_div = Eigen::VectorXd::Zero(lambda_flat.size());
  for (const EdgeDot& e : dot_.edges()) {
    const Index coff = static_cast<Index>(index_.node_offset(e.child));
    const Index poff = static_cast<Index>(index_.node_offset(e.parent));
    double edge_total = 0.0;
    for (Index local = 0; local < nd; ++local) {
      if (!config_.mask.tied(e.child, static_cast<std::size_t>(local))) continue;
      const Index s = slot_base + e.slot[static_cast<std::size_t>(local)];
      const double lam = lambda_flat[s];
      const PenaltyValue pv = penalty(x[coff + local] - x[poff + local], config_.divergence);
      edge_total += pv.value / lam;
      slot_div[s] += pv.value;
      if (grad) {
        const double gd = beta * pv.derivative / lam;
        (*grad)[coff + local] += gd;
        (*grad)[poff + local] -= gd;
      }
    }
    total += beta * edge_total;
    slot_base += e.lambda.size();
  }

  if (optimizes_lambda()) {
    const double a1 = prior_->shape + 1.0;
    Index s = 0;
    for (std::size_t ei = 0; ei < dot_.edges().size(); ++ei) {
      const auto& b = prior_->scale[ei];
      for (Index i = 0; i < b.size(); ++i, ++s) {
        const double lam = lambda_flat[s];
        total += a1 * std::log(lam) + b[i] / lam;
        // d/d(log lambda) of beta*D/lambda + (a+1) log lambda + b/lambda.
        if (grad) (*grad)[ntheta + s] = -beta * slot_div[s] / lam + a1 - b[i] / lam;
      }
    }
  }
  return total;
}

double TransferObjective::value(const Eigen::VectorXd& x) const { return evaluate(x, nullptr); }

Eigen::VectorXd TransferObjective::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g;
  evaluate(x, &g);
  return g;
}

double TransferObjective::value_and_gradient(const Eigen::VectorXd& x,
                                             Eigen::VectorXd& grad) const {
  return evaluate(x, &grad);
}

double TransferObjective::data_loglik(const Eigen::VectorXd& x) const {
  ParamState state{index_, x.head(static_cast<Index>(theta_dim()))};
  double total = 0.0;
  for (NodeId n = 0; n < h_->size(); ++n) {
    if (family_ == Family::gaussian) {
      if (gaussian_[n]) total += gaussian_loglik(*gaussian_[n], gaussian_params(state, n));
    } else if (counts_[n]) {
      total += multinomial_loglik(*counts_[n], multinomial_params(state, n), config_.alpha);
    }
  }
  return total;
}

Eigen::VectorXd TransferObjective::data_curvature(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != free_dim())
    throw std::invalid_argument("objective: free vector has the wrong length");
  const Index nd = static_cast<Index>(index_.node_dim());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Index>(theta_dim()));
  for (NodeId n = 0; n < h_->size(); ++n) {
    const Index off = static_cast<Index>(index_.node_offset(n));
    if (family_ == Family::gaussian) {
      if (!gaussian_[n]) continue;
      const Index d = static_cast<Index>(dim_);
      const double m = gaussian_[n]->count;
      const Eigen::MatrixXd prec = unpack_upper(x.segment(off + d, nd - d), dim_);
      const Eigen::MatrixXd cov = prec.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
      for (Index i = 0; i < d; ++i) h[off + i] = m * prec(i, i);
      // -m/2 log det K; a packed off-diagonal entry moves K(i,j) and K(j,i).
      Index k = off + d;
      for (Index i = 0; i < d; ++i)
        for (Index j = i; j < d; ++j, ++k)
          h[k] = i == j ? 0.5 * m * cov(i, i) * cov(i, i)
                        : m * (cov(i, j) * cov(i, j) + cov(i, i) * cov(j, j));
    } else {
      if (!counts_[n]) continue;
      const double total = counts_[n]->counts.sum() + config_.alpha * static_cast<double>(nd);
      const Eigen::VectorXd p = softmax(x.segment(off, nd));
      h.segment(off, nd) = total * (p.array() * (1.0 - p.array())).matrix();
    }
  }
  return h;
}

double TransferObjective::penalty_term(const Eigen::VectorXd& x) const {
  ParamState state{index_, x.head(static_cast<Index>(theta_dim()))};
  return transfer_penalty(state, *h_, dot_at(x), config_);
}

double TransferObjective::prior_term(const Eigen::VectorXd& x) const {
  if (!optimizes_lambda()) return 0.0;
  return hyperprior_term(dot_at(x), *prior_);
}

double joint_objective(const TransferObjective& objective, const Eigen::VectorXd& x) {
  return objective.value(x);
}

Eigen::VectorXd joint_gradient(const TransferObjective& objective, const Eigen::VectorXd& x) {
  return objective.gradient(x);
}

}  // namespace hbt
