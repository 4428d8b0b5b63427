#include "hbt/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hbt/crossval.hpp"
#include "hbt/likelihoods.hpp"

namespace hbt {

namespace {

using Eigen::Index;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Training/test view of the data for one CV fold: each leaf's own folds, same
// fold index across leaves. Internal-node data always stays in training.
struct FoldData {
  HierarchyData train;
  std::vector<std::optional<Dataset>> test;  // per node, leaves only
};

std::vector<FoldData> make_folds(const Hierarchy& h, const HierarchyData& data, std::size_t k,
                                 std::uint64_t seed) {
  std::vector<FoldData> out(k);
  for (auto& f : out) {
    f.train = data;
    f.test.assign(h.size(), std::nullopt);
  }
  for (NodeId leaf : h.leaves()) {
    const Dataset& d = *data.find(leaf);
    const auto folds = clamped_folds(d.size(), k, seed);
    for (std::size_t f = 0; f < k; ++f) {
      out[f].train.per_node[leaf] = d.subset(folds[f].train);
      if (!folds[f].test.empty()) out[f].test[leaf] = d.subset(folds[f].test);
    }
  }
  return out;
}

double safe_loglik(const NodeParams& p, const Dataset& d) {
  const double v = dataset_loglik(p, d);
  return std::isnan(v) ? kNegInf : v;
}

}  // namespace

void CvGrid::validate() const {
  if (values.empty()) throw std::invalid_argument("cv grid: no candidate values");
  if (folds < 2) throw std::invalid_argument("cv grid: need at least 2 folds");
  for (double v : values)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("cv grid: values must be finite and >= 0");
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi >= lo) || count == 0)
    throw std::invalid_argument("log_grid: need 0 < lo <= hi and count >= 1");
  std::vector<double> out;
  if (count == 1) return {lo};
  const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(i + 1 == count ? hi : std::exp(std::log(lo) + step * static_cast<double>(i)));
  return out;
}

NodeParams fit_regularized(const Dataset& data, double alpha) {
  if (data.empty()) throw std::invalid_argument("fit_regularized: empty dataset");
  if (data.family == Family::gaussian) return gaussian_ml(gaussian_stats(data.rows), alpha);
  return multinomial_ml(count_stats(data.docs, data.dim), alpha);
}

std::vector<LeafEstimate> fit_cvreg(const Hierarchy& h, const HierarchyData& data,
                                    const CvGrid& grid) {
  grid.validate();
  std::vector<LeafEstimate> out;
  for (NodeId leaf : h.leaves()) {
    const Dataset* d = data.find(leaf);
    if (!d || d->empty())
      throw std::invalid_argument("fit_cvreg: empty dataset for leaf '" + h.name(leaf) + "'");

    LeafEstimate est;
    est.node = leaf;
    est.alpha = grid.values.front();
    if (grid.values.size() > 1) {
      if (d->size() < 2)
        throw std::invalid_argument("fit_cvreg: leaf '" + h.name(leaf) +
                                    "' needs at least 2 instances to cross-validate");
      const auto folds = clamped_folds(d->size(), grid.folds, grid.seed);
      std::vector<std::pair<Dataset, Dataset>> splits;
      for (const auto& f : folds)
        if (!f.test.empty()) splits.emplace_back(d->subset(f.train), d->subset(f.test));

      double best = kNegInf;
      bool any = false;
      for (double alpha : grid.values) {
        double score = 0.0;
        try {
          for (const auto& [train, test] : splits) score += safe_loglik(fit_regularized(train, alpha), test);
        } catch (const NumericalError&) {
          score = kNegInf;
        }
        if (!any || score > best) {
          best = score;
          est.alpha = alpha;
          any = true;
        }
      }
      est.cv_score = best;
    }
    est.params = fit_regularized(*d, est.alpha);
    out.push_back(std::move(est));
  }
  return out;
}

CvConstResult fit_cvconst(const Hierarchy& h, const HierarchyData& data,
                          const ObjectiveConfig& base, const CvGrid& betas,
                          const OptimizerConfig& opt) {
  betas.validate();
  data.require_leaf_data(h);
  ObjectiveConfig cfg = base;
  cfg.dot_mode = DotMode::none;

  CvConstResult res;
  res.beta = betas.values.front();
  if (betas.values.size() > 1) {
    const auto folds = make_folds(h, data, betas.folds, betas.seed);
    double best = kNegInf;
    bool any = false;
    for (double beta : betas.values) {
      cfg.beta = beta;
      double score = 0.0;
      try {
        for (const auto& fold : folds) {
          const FitResult fit = fit_map(h, fold.train, cfg, std::nullopt, std::nullopt, opt);
          for (NodeId leaf : h.leaves())
            if (fold.test[leaf])
              score += safe_loglik(node_params(fit.state, data.family, leaf), *fold.test[leaf]);
        }
      } catch (const NumericalError&) {
        score = kNegInf;
      }
      if (!any || score > best) {
        best = score;
        res.beta = beta;
        any = true;
      }
    }
  }
  cfg.beta = res.beta;
  res.fit = fit_map(h, data, cfg, std::nullopt, std::nullopt, opt);
  return res;
}

namespace {

std::vector<Eigen::VectorXd> own_smoothed(const Hierarchy& h, const HierarchyData& data,
                                          double alpha) {
  std::vector<Eigen::VectorXd> out(h.size());
  const double vocab = static_cast<double>(data.dim);
  for (NodeId n = 0; n < h.size(); ++n) {
    const CountStats c = count_stats(data.pooled(h, n).docs, data.dim);
    const double total = c.counts.sum() + alpha * vocab;
    if (total <= 0.0)
      throw NumericalError("shrinkage: node '" + h.name(n) + "' has no counts and no smoothing");
    out[n] = (c.counts.array() + alpha) / total;
  }
  return out;
}

std::vector<Eigen::VectorXd> interpolate(const Hierarchy& h,
                                         const std::vector<Eigen::VectorXd>& own,
                                         const std::vector<double>& w) {
  std::vector<Eigen::VectorXd> fin(h.size());
  for (NodeId n : h.preorder()) {
    const auto parent = h.parent(n);
    if (!parent) {
      fin[n] = own[n];
      continue;
    }
    const double wd = w.at(h.depth(n));
    fin[n] = wd * own[n] + (1.0 - wd) * fin[*parent];
  }
  return fin;
}

}  // namespace

ShrinkageResult shrinkage_estimate(const Hierarchy& h, const HierarchyData& data,
                                   const std::vector<double>& level_weights, double alpha) {
  if (data.family != Family::multinomial)
    throw std::invalid_argument(
        "shrinkage: only multinomial models are supported (interpolated covariances need not "
        "be valid)");
  if (level_weights.size() < h.max_depth() + 1)
    throw std::invalid_argument("shrinkage: need one weight per hierarchy level");
  for (std::size_t l = 1; l < level_weights.size(); ++l)
    if (!(level_weights[l] >= 0.0 && level_weights[l] <= 1.0))
      throw std::invalid_argument("shrinkage: weights must lie in [0,1]");

  ShrinkageResult res;
  res.level_weights = level_weights;
  res.probabilities = interpolate(h, own_smoothed(h, data, alpha), level_weights);
  for (const auto& p : res.probabilities) res.params.push_back({p.array().log().matrix()});
  return res;
}

ShrinkageResult fit_shrinkage(const Hierarchy& h, const HierarchyData& data, const CvGrid& grid,
                              double alpha) {
  if (data.family != Family::multinomial)
    throw std::invalid_argument(
        "shrinkage: only multinomial models are supported (interpolated covariances need not "
        "be valid)");
  grid.validate();
  for (double v : grid.values)
    if (v > 1.0) throw std::invalid_argument("shrinkage: weights must lie in [0,1]");
  data.require_leaf_data(h);

  const std::size_t levels = h.max_depth();
  std::vector<double> w(levels + 1, 1.0);
  if (levels == 0) return shrinkage_estimate(h, data, w, alpha);

  const auto folds = make_folds(h, data, grid.folds, grid.seed);
  std::vector<std::vector<Eigen::VectorXd>> own;
  for (const auto& f : folds) own.push_back(own_smoothed(h, f.train, alpha));

  auto score = [&](const std::vector<double>& weights) {
    double total = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto fin = interpolate(h, own[f], weights);
      for (NodeId leaf : h.leaves()) {
        if (!folds[f].test[leaf]) continue;
        const Eigen::VectorXd logp = fin[leaf].array().log().matrix();
        for (const auto& doc : folds[f].test[leaf]->docs) total += nb_doc_loglik(doc, logp);
      }
    }
    return std::isnan(total) ? kNegInf : total;
  };

  const std::size_t g = grid.values.size();
  double combos = std::pow(static_cast<double>(g), static_cast<double>(levels));
  if (combos <= 4096.0) {
    std::vector<std::size_t> pick(levels, 0);
    double best = kNegInf;
    bool any = false;
    std::vector<double> cand(levels + 1, 1.0);
    for (std::size_t c = 0; c < static_cast<std::size_t>(combos); ++c) {
      std::size_t rem = c;
      for (std::size_t l = levels; l >= 1; --l) {
        cand[l] = grid.values[rem % g];
        rem /= g;
      }
      const double s = score(cand);
      if (!any || s > best) {
        best = s;
        w = cand;
        any = true;
      }
    }
  } else {
    // Coordinate ascent over levels, top-down, from the first grid value.
    std::fill(w.begin() + 1, w.end(), grid.values.front());
    double best = score(w);
    for (int sweep = 0; sweep < 3; ++sweep) {
      bool moved = false;
      for (std::size_t l = 1; l <= levels; ++l) {
        for (double v : grid.values) {
          std::vector<double> cand = w;
          cand[l] = v;
          const double s = score(cand);
          if (s > best) {
            best = s;
            w = cand;
            moved = true;
          }
        }
      }
      if (!moved) break;
    }
  }
  return shrinkage_estimate(h, data, w, alpha);
}

std::vector<std::optional<NodeParams>> fit_likelihood(const Hierarchy& h,
                                                      const HierarchyData& data) {
  std::vector<std::optional<NodeParams>> out(h.size());
  for (NodeId leaf : h.leaves()) {
    const Dataset* d = data.find(leaf);
    if (!d || d->empty())
      throw std::invalid_argument("fit_likelihood: empty dataset for leaf '" + h.name(leaf) + "'");
    if (d->family == Family::gaussian && d->size() <= d->dim)
      throw NumericalError("fit_likelihood: leaf '" + h.name(leaf) + "' has " +
                           std::to_string(d->size()) + " instances for dimension " +
                           std::to_string(d->dim) + " (singular scatter)");
    out[leaf] = fit_regularized(*d, 0.0);
  }
  return out;
}

}  // namespace hbt
