#include <stdexcept>
#include <string>

#include "hbt/estimation.hpp"
#include "hbt/likelihoods.hpp"

namespace hbt {

Eigen::VectorXd ml_estimate(const Dataset& data, double alpha) {
  if (data.family == Family::gaussian) {
    const GaussianParams p = gaussian_ml(gaussian_stats(data.rows), alpha);
    Eigen::VectorXd out(p.mean.size() + static_cast<Eigen::Index>(packed_size(data.dim)));
    out << p.mean, pack_upper(p.precision);
    return out;
  }
  return multinomial_ml(count_stats(data.docs, data.dim), alpha).logits;
}

std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::per_node_ml: return "ml";
    case InitKind::pooled_root: return "pooled";
    case InitKind::user: return "user";
  }
  return "ml";
}

InitKind init_kind_from_string(std::string_view s) {
  if (s == "ml") return InitKind::per_node_ml;
  if (s == "pooled") return InitKind::pooled_root;
  if (s == "user") return InitKind::user;
  throw std::invalid_argument("unknown init policy '" + std::string(s) + "'");
}

ParamState init_state(const Hierarchy& h, const HierarchyData& data, double alpha,
                      const InitPolicy& policy) {
  ParamState state{layout(h, data.family, data.dim), {}};
  state.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(state.index.total_dim()));

  if (policy.kind == InitKind::user) {
    if (static_cast<std::size_t>(policy.user.size()) != state.index.total_dim())
      throw std::invalid_argument("init_state: user vector has the wrong length");
    state.values = policy.user;
    return state;
  }

  const double a = data.family == Family::multinomial && alpha == 0.0 ? kInitPseudocount : alpha;
  auto estimate = [&](NodeId n) {
    const Dataset pooled = data.pooled(h, n);
    if (pooled.empty())
      throw NumericalError("init_state: node '" + h.name(n) + "' has no data beneath it");
    try {
      return ml_estimate(pooled, a);
    } catch (const NumericalError& e) {
      throw NumericalError("infeasible initialization at node '" + h.name(n) + "': " + e.what());
    }
  };

  if (policy.kind == InitKind::pooled_root) {
    const Eigen::VectorXd root = estimate(h.root());
    for (NodeId n = 0; n < h.size(); ++n) state.node_block(n) = root;
    return state;
  }
  for (NodeId n = 0; n < h.size(); ++n) state.node_block(n) = estimate(n);
  return state;
}

}  // namespace hbt
