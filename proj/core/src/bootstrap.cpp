#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hbt/estimation.hpp"
#include "hbt/likelihoods.hpp"
#include "hbt/random.hpp"

namespace hbt {

void BootstrapConfig::validate() const {
  if (resamples < 2) throw std::invalid_argument("bootstrap: need at least 2 resamples");
  if (!(variance_floor > 0.0)) throw std::invalid_argument("bootstrap: variance floor must be > 0");
}

namespace {

using Eigen::Index;

// Additive sufficient statistics so internal nodes can pool their children.
struct NodeSummary {
  GaussianStats gauss;
  CountStats counts;

  NodeSummary& operator+=(const NodeSummary& o) {
    if (gauss.sum.size() > 0) gauss += o.gauss;
    if (counts.counts.size() > 0) counts.counts += o.counts.counts;
    return *this;
  }
};

NodeSummary empty_summary(Family family, std::size_t dim) {
  NodeSummary s;
  if (family == Family::gaussian)
    s.gauss = GaussianStats::zero(dim);
  else
    s.counts.counts = Eigen::VectorXd::Zero(static_cast<Index>(dim));
  return s;
}

NodeSummary summarize(const Dataset& d) {
  NodeSummary s;
  if (d.family == Family::gaussian)
    s.gauss = gaussian_stats(d.rows);
  else
    s.counts = count_stats(d.docs, d.dim);
  return s;
}

Eigen::VectorXd estimate(const NodeSummary& s, Family family, std::size_t dim, double alpha) {
  if (family == Family::gaussian) {
    const GaussianParams p = gaussian_ml(s.gauss, alpha);
    Eigen::VectorXd out(static_cast<Index>(dim + packed_size(dim)));
    out << p.mean, pack_upper(p.precision);
    return out;
  }
  return multinomial_ml(s.counts, alpha).logits;
}

}  // namespace

DotCoefficients bootstrap_dot(const Hierarchy& h, const HierarchyData& data,
                              const BootstrapConfig& cfg, double alpha,
                              const TyingMask& mask_in, DotGranularity granularity) {
  cfg.validate();
  if (!(alpha >= 0.0)) throw std::invalid_argument("bootstrap: alpha must be >= 0");
  if (data.family == Family::multinomial && alpha == 0.0)
    throw std::invalid_argument(
        "bootstrap: multinomial estimates need alpha > 0 (zero counts give -inf logits)");
  for (NodeId leaf : h.leaves()) {
    const Dataset* d = data.find(leaf);
    if (!d || d->empty())
      throw std::invalid_argument("bootstrap: empty dataset for leaf '" + h.name(leaf) + "'");
  }

  const ParamIndex index = layout(h, data.family, data.dim);
  const TyingMask mask = mask_in.empty() ? TyingMask::for_family(h, data.family, data.dim) : mask_in;
  const auto edges = h.edges();
  const Index nd = static_cast<Index>(index.node_dim());

  // Welford accumulators per edge over node-local coordinates.
  std::vector<Eigen::VectorXd> mean(edges.size(), Eigen::VectorXd::Zero(nd));
  std::vector<Eigen::VectorXd> m2(edges.size(), Eigen::VectorXd::Zero(nd));

  // Bottom-up order: reverse preorder visits children before parents.
  const std::vector<NodeId> post(h.preorder().rbegin(), h.preorder().rend());

  for (std::size_t trial = 0; trial < cfg.resamples; ++trial) {
    Rng rng(derive_seed(cfg.seed, {trial}));
    std::vector<NodeSummary> own(h.size(), empty_summary(data.family, data.dim));
    for (NodeId n = 0; n < h.size(); ++n) {
      const Dataset* d = data.find(n);
      if (!d || d->empty()) continue;
      std::vector<std::size_t> idx(d->size());
      for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, d->size()));
      own[n] = summarize(d->subset(idx));
    }
    std::vector<NodeSummary> pooled = own;
    for (NodeId n : post)
      if (auto p = h.parent(n)) pooled[*p] += pooled[n];

    std::vector<Eigen::VectorXd> theta(h.size());
    for (NodeId n = 0; n < h.size(); ++n) theta[n] = estimate(pooled[n], data.family, data.dim, alpha);

    const double k = static_cast<double>(trial + 1);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const Eigen::VectorXd delta = theta[edges[e].first] - theta[edges[e].second];
      const Eigen::VectorXd dev = delta - mean[e];
      mean[e] += dev / k;
      m2[e] += dev.cwiseProduct(delta - mean[e]);
    }
  }

  DotCoefficients dot = DotCoefficients::constant(h, index, mask, granularity, 1.0);
  const double denom = static_cast<double>(cfg.resamples - 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    EdgeDot& ed = dot.edge_for(edges[e].first);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(ed.lambda.size());
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(ed.lambda.size());
    for (Index local = 0; local < nd; ++local) {
      const int s = ed.slot[static_cast<std::size_t>(local)];
      if (s < 0) continue;
      sum[s] += m2[e][local] / denom;
      cnt[s] += 1.0;
    }
    for (Index s = 0; s < ed.lambda.size(); ++s) {
      const double var = cnt[s] > 0.0 ? sum[s] / cnt[s] : 0.0;
      if (!std::isfinite(var)) throw NumericalError("bootstrap: non-finite difference variance");
      ed.lambda[s] = std::max(var, cfg.variance_floor);
    }
  }
  return dot;
}

}  // namespace hbt
