#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hbt/estimation.hpp"
#include "hbt/likelihoods.hpp"
#include "hbt/random.hpp"

namespace hbt {

namespace {

using Eigen::Index;

/// Change of variables for one block. Tied theta coordinates are expressed as
/// differences from their parent (the root keeps its value), and every
/// difference is scaled by the inverse square root of a diagonal curvature
/// estimate. Small lambdas otherwise make child-parent directions far stiffer
/// than the rest and plain CG crawls.
class BlockTransform {
 public:
  BlockTransform(const TransferObjective& obj, const Eigen::VectorXd& x,
                 const std::vector<Index>& active)
      : x_(x), active_(active) {
    const ParamIndex& index = obj.index();
    const Hierarchy& h = obj.hierarchy();
    const std::size_t theta = obj.theta_dim();
    const Index n = static_cast<Index>(active.size());
    parent_.assign(active.size(), -1);
    scale_ = Eigen::VectorXd::Ones(n);

    std::vector<Index> pos(theta, -1);
    for (std::size_t k = 0; k < active.size(); ++k)
      if (static_cast<std::size_t>(active[k]) < theta) pos[active[k]] = static_cast<Index>(k);

    // Theta positions ordered so that parents precede children.
    std::vector<std::size_t> rank(h.size());
    for (std::size_t i = 0; i < h.preorder().size(); ++i) rank[h.preorder()[i]] = i;
    for (std::size_t k = 0; k < active.size(); ++k)
      if (static_cast<std::size_t>(active[k]) < theta) order_.push_back(static_cast<Index>(k));
    std::stable_sort(order_.begin(), order_.end(), [&](Index a, Index b) {
      return rank[index.locate(active[a]).node] < rank[index.locate(active[b]).node];
    });

    const DotCoefficients dot = obj.dot_at(x);
    const double beta = obj.config().beta;
    Eigen::VectorXd pen = Eigen::VectorXd::Zero(n);
    for (Index k : order_) {
      const std::size_t c = static_cast<std::size_t>(active_[k]);
      const NodeId node = index.locate(c).node;
      const auto parent = h.parent(node);
      if (!parent) continue;
      const std::size_t local = c - index.node_offset(node);
      if (!obj.config().mask.tied(node, local)) continue;
      const Index pk = pos[index.node_offset(*parent) + local];
      if (pk < 0) continue;
      parent_[k] = pk;
      const EdgeDot& e = dot.edge_for(node);
      // Quadratic-penalty curvature; a proxy for the other divergences.
      pen[k] = 2.0 * beta / e.lambda[e.slot[local]];
    }

    // Data curvature of a difference coordinate: everything it moves.
    const Eigen::VectorXd dc = obj.data_curvature(x);
    Eigen::VectorXd sub = Eigen::VectorXd::Zero(n);
    for (Index k : order_) sub[k] = dc[active_[k]];
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
      if (parent_[*it] >= 0) sub[parent_[*it]] += sub[*it];
    for (Index k : order_) {
      const double hk = sub[k] + pen[k];
      scale_[k] = hk > 0.0 && std::isfinite(hk) ? 1.0 / std::sqrt(hk) : 1.0;
    }
  }

  Eigen::VectorXd initial() const {
    Eigen::VectorXd z(static_cast<Index>(active_.size()));
    for (std::size_t k = 0; k < active_.size(); ++k) z[static_cast<Index>(k)] = x_[active_[k]];
    for (Index k : order_)
      if (parent_[k] >= 0) z[k] -= x_[active_[parent_[k]]];
    return z.cwiseQuotient(scale_);
  }

  Eigen::VectorXd to_x(const Eigen::VectorXd& y) const {
    Eigen::VectorXd v = y.cwiseProduct(scale_);
    for (Index k : order_)
      if (parent_[k] >= 0) v[k] += v[parent_[k]];
    Eigen::VectorXd full = x_;
    for (std::size_t k = 0; k < active_.size(); ++k) full[active_[k]] = v[static_cast<Index>(k)];
    return full;
  }

  Eigen::VectorXd to_y_gradient(const Eigen::VectorXd& gx) const {
    Eigen::VectorXd g(static_cast<Index>(active_.size()));
    for (std::size_t k = 0; k < active_.size(); ++k) g[static_cast<Index>(k)] = gx[active_[k]];
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
      if (parent_[*it] >= 0) g[parent_[*it]] += g[*it];
    return g.cwiseProduct(scale_);
  }

  /// |g|_inf of the active coordinates in x, recovered from a y gradient.
  double x_grad_norm(const Eigen::VectorXd& gy) const {
    const Eigen::VectorXd gd = gy.cwiseQuotient(scale_);
    Eigen::VectorXd gx = gd;
    for (Index k : order_)
      if (parent_[k] >= 0) gx[parent_[k]] -= gd[k];
    return gx.lpNorm<Eigen::Infinity>();
  }

 private:
  Eigen::VectorXd x_;
  std::vector<Index> active_;
  std::vector<Index> parent_;  // position of the tied parent coordinate, or -1
  std::vector<Index> order_;   // theta positions, parents first
  Eigen::VectorXd scale_;
};

/// Runs CG over the coordinates in `active`, holding the rest of x fixed.
CgResult minimize_block(const TransferObjective& obj, const Eigen::VectorXd& x,
                        const std::vector<Index>& active, const OptimizerConfig& opt) {
  const BlockTransform t(obj, x, active);
  const ObjectiveFn f = [&](const Eigen::VectorXd& y) { return obj.value(t.to_x(y)); };
  const GradientFn g = [&](const Eigen::VectorXd& y) {
    return t.to_y_gradient(obj.gradient(t.to_x(y)));
  };
  const FeasibleFn feasible = [&](const Eigen::VectorXd& y) { return obj.feasible(t.to_x(y)); };
  const GradMeasureFn measure = [&](const Eigen::VectorXd&, const Eigen::VectorXd& gy) {
    return t.x_grad_norm(gy);
  };

  CgResult r = cg_minimize(f, g, t.initial(), opt, feasible, measure);
  r.x = t.to_x(r.x);
  return r;
}

double active_grad_norm(const TransferObjective& obj, const Eigen::VectorXd& x,
                        const std::vector<Index>& active) {
  const Eigen::VectorXd g = obj.gradient(x);
  double m = 0.0;
  for (Index i : active) m = std::max(m, std::abs(g[i]));
  return m;
}

struct Blocks {
  std::vector<Index> all;
  std::vector<std::vector<Index>> phases;
};

Blocks make_blocks(const TransferObjective& obj, const OptimizerConfig& opt) {
  const ParamIndex& index = obj.index();
  std::vector<bool> frozen(index.groups().size(), false);
  for (const auto& label : opt.frozen_groups) frozen[index.group_index(label)] = true;

  Blocks b;
  std::vector<std::vector<Index>> by_group(index.groups().size());
  for (std::size_t c = 0; c < index.total_dim(); ++c) {
    const std::size_t g = index.locate(c).group;
    if (frozen[g]) continue;
    by_group[g].push_back(static_cast<Index>(c));
    b.all.push_back(static_cast<Index>(c));
  }
  std::vector<Index> lambda;
  for (std::size_t c = obj.theta_dim(); c < obj.free_dim(); ++c)
    lambda.push_back(static_cast<Index>(c));
  b.all.insert(b.all.end(), lambda.begin(), lambda.end());

  const bool alternate = obj.family() == Family::gaussian &&
                         opt.block_mode == BlockMode::alternating_gaussian;
  if (!alternate) {
    if (!b.all.empty()) b.phases.push_back(b.all);
    return b;
  }
  for (auto& group : by_group) {
    if (group.empty()) continue;
    group.insert(group.end(), lambda.begin(), lambda.end());
    b.phases.push_back(std::move(group));
  }
  if (b.phases.empty() && !lambda.empty()) b.phases.push_back(lambda);
  return b;
}

FitResult run_fit(const TransferObjective& obj, Eigen::VectorXd x, const OptimizerConfig& opt) {
  const Blocks blocks = make_blocks(obj, opt);
  FitResult res;
  res.trace.push_back(obj.value(x));
  CgStatus last_status = CgStatus::converged;

  if (blocks.phases.size() == 1) {
    const CgResult r = minimize_block(obj, x, blocks.phases.front(), opt);
    x = r.x;
    last_status = r.status;
    res.iterations = r.iterations;
    res.trace.insert(res.trace.end(), r.trace.begin() + 1, r.trace.end());
  } else if (!blocks.phases.empty()) {
    for (std::size_t pass = 0; pass < opt.outer_block_iters; ++pass) {
      const Eigen::VectorXd before = x;
      for (const auto& phase : blocks.phases) {
        const CgResult r = minimize_block(obj, x, phase, opt);
        x = r.x;
        res.iterations += r.iterations;
        res.trace.insert(res.trace.end(), r.trace.begin() + 1, r.trace.end());
      }
      if (active_grad_norm(obj, x, blocks.all) <= opt.grad_tol) break;
      if ((x - before).lpNorm<Eigen::Infinity>() < opt.grad_tol) break;
    }
  }

  res.grad_norm = blocks.all.empty() ? 0.0 : active_grad_norm(obj, x, blocks.all);
  res.converged = res.grad_norm <= opt.grad_tol;
  if (!res.converged && blocks.phases.size() > 1) {
    // Alternation stalls on coupled blocks; finish with one joint run.
    const CgResult r = minimize_block(obj, x, blocks.all, opt);
    x = r.x;
    res.iterations += r.iterations;
    res.trace.insert(res.trace.end(), r.trace.begin() + 1, r.trace.end());
    res.grad_norm = r.grad_norm;
    res.converged = r.converged();
  } else if (!res.converged && blocks.phases.size() == 1) {
    res.converged = last_status == CgStatus::converged;
  }
  res.objective_value = obj.value(x);
  res.state = ParamState{obj.index(), x.head(static_cast<Index>(obj.theta_dim()))};
  res.dot = obj.dot_at(x);
  return res;
}

}  // namespace

FitResult fit_map(const Hierarchy& h, const HierarchyData& data, const ObjectiveConfig& config,
                  const std::optional<DotCoefficients>& dot,
                  const std::optional<HyperpriorSpec>& prior, const OptimizerConfig& opt,
                  const InitPolicy& init) {
  opt.validate();
  config.validate();
  if (config.dot_mode != DotMode::none && !dot)
    throw std::invalid_argument("fit_map: DOT mode '" + std::string(to_string(config.dot_mode)) +
                                "' needs DOT coefficients");

  DotCoefficients base = dot ? *dot : DotCoefficients{};
  const TransferObjective obj(h, data, config, base, prior);

  const ParamState start = init_state(h, data, config.alpha, init);
  if (!obj.feasible(obj.pack(start.values)))
    throw NumericalError("fit_map: infeasible initialization");

  if (!obj.optimizes_lambda() || opt.starts <= 1)
    return run_fit(obj, obj.pack(start.values), opt);

  std::optional<FitResult> best;
  for (std::size_t s = 0; s < opt.starts; ++s) {
    Eigen::VectorXd x0 = obj.pack(start.values);
    if (s > 0) {
      Rng rng(derive_seed(opt.seed, {s}));
      for (Index i = static_cast<Index>(obj.theta_dim()); i < x0.size(); ++i)
        x0[i] += standard_normal(rng);
    }
    FitResult r = run_fit(obj, std::move(x0), opt);
    if (!best || r.objective_value < best->objective_value) best = std::move(r);
  }
  return *best;
}

}  // namespace hbt
