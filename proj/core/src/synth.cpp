#include "hbt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "hbt/random.hpp"

namespace hbt {

namespace {

enum Stream : std::uint64_t { kParams = 1, kTrain = 2, kTest = 3 };

Eigen::VectorXd normal_vector(Rng& rng, std::size_t n, double scale) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * standard_normal(rng);
  return v;
}

GaussianParams gaussian_root(Rng& rng, const SynthSpec& spec) {
  const auto d = static_cast<Eigen::Index>(spec.dim);
  GaussianParams p;
  p.mean = normal_vector(rng, spec.dim, spec.root_scale);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) a(i, j) = standard_normal(rng);
  Eigen::MatrixXd cov = a * a.transpose() / static_cast<double>(d);
  cov.diagonal().array() += 0.5;
  p.precision = cov.inverse();
  p.precision = 0.5 * (p.precision + p.precision.transpose());
  return p;
}

GaussianParams gaussian_child(Rng& rng, const GaussianParams& parent, double s) {
  GaussianParams c;
  c.mean = parent.mean + normal_vector(rng, static_cast<std::size_t>(parent.mean.size()), s);
  const Eigen::VectorXd scale =
      (0.5 * normal_vector(rng, static_cast<std::size_t>(parent.mean.size()), s)).array().exp();
  c.precision = scale.asDiagonal() * parent.precision * scale.asDiagonal();
  return c;
}

Eigen::MatrixXd sample_gaussian(Rng& rng, const GaussianParams& p, std::size_t n) {
  const auto d = p.mean.size();
  Eigen::LLT<Eigen::MatrixXd> llt(p.precision);
  if (llt.info() != Eigen::Success) throw std::runtime_error("synthesize: precision not PD");
  const Eigen::MatrixXd upper = llt.matrixU();  // K = U^T U
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const Eigen::VectorXd z = normal_vector(rng, static_cast<std::size_t>(d), 1.0);
    // x = mu + U^{-1} z has covariance U^{-1} U^{-T} = K^{-1}.
    const Eigen::VectorXd x =
        p.mean + upper.triangularView<Eigen::Upper>().solve(z);
    rows.row(r) = x.transpose();
  }
  return rows;
}

std::vector<SparseDoc> sample_documents(Rng& rng, const MultinomialParams& p, std::size_t n,
                                        std::size_t length) {
  const Eigen::VectorXd prob = softmax(p.logits);
  std::vector<double> cdf(static_cast<std::size_t>(prob.size()));
  std::partial_sum(prob.data(), prob.data() + prob.size(), cdf.begin());
  cdf.back() = 1.0;
  std::vector<SparseDoc> docs;
  docs.reserve(n);
  std::vector<double> counts(cdf.size());
  for (std::size_t k = 0; k < n; ++k) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t t = 0; t < length; ++t) {
      const double u = uniform01(rng);
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const auto w = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
      counts[w] += 1.0;
    }
    SparseDoc doc;
    for (std::size_t w = 0; w < counts.size(); ++w)
      if (counts[w] > 0.0) {
        doc.ids.push_back(static_cast<std::uint32_t>(w));
        doc.counts.push_back(counts[w]);
      }
    docs.push_back(std::move(doc));
  }
  return docs;
}

Dataset sample(Rng& rng, const NodeParams& p, const SynthSpec& spec, std::size_t n) {
  if (const auto* g = std::get_if<GaussianParams>(&p))
    return Dataset::gaussian(sample_gaussian(rng, *g, n));
  return Dataset::documents(spec.dim,
                            sample_documents(rng, std::get<MultinomialParams>(p), n,
                                             spec.doc_length));
}

}  // namespace

void SynthSpec::validate() const {
  if (depth == 0) throw std::invalid_argument("synth: depth must be >= 1");
  if (branching == 0) throw std::invalid_argument("synth: branching must be >= 1");
  if (dim == 0) throw std::invalid_argument("synth: dim must be >= 1");
  if (family == Family::multinomial && dim < 2)
    throw std::invalid_argument("synth: vocabulary must have at least 2 words");
  if (!(perturbation >= 0.0) || !std::isfinite(perturbation))
    throw std::invalid_argument("synth: perturbation must be finite and >= 0");
  if (!(root_scale >= 0.0) || !std::isfinite(root_scale))
    throw std::invalid_argument("synth: root scale must be finite and >= 0");
  if (train_count == 0) throw std::invalid_argument("synth: train count must be positive");
  if (test_total ? *test_total == 0 : test_count == 0)
    throw std::invalid_argument("synth: test count must be positive");
  if (family == Family::multinomial && doc_length == 0)
    throw std::invalid_argument("synth: document length must be positive");
  double nodes = 1.0, layer = 1.0;
  for (std::size_t k = 0; k < depth; ++k) nodes += (layer *= static_cast<double>(branching));
  if (nodes > 1e5) throw std::invalid_argument("synth: tree too large");
}

std::size_t SynthSpec::test_count_for(std::size_t leaf_rank, std::size_t leaf_count) const {
  if (!test_total) return test_count;
  return *test_total / leaf_count + (leaf_rank < *test_total % leaf_count ? 1 : 0);
}

Hierarchy complete_tree(std::size_t depth, std::size_t branching) {
  std::vector<std::string> names{"root"};
  std::vector<NamedEdge> edges;
  std::vector<std::string> layer{"root"};
  for (std::size_t k = 0; k < depth; ++k) {
    std::vector<std::string> next;
    for (const auto& parent : layer)
      for (std::size_t b = 0; b < branching; ++b) {
        std::string child =
            parent == "root" ? "n" + std::to_string(b) : parent + "_" + std::to_string(b);
        names.push_back(child);
        edges.emplace_back(child, parent);
        next.push_back(std::move(child));
      }
    layer = std::move(next);
  }
  return Hierarchy::build(names, edges);
}

SynthResult synthesize(const SynthSpec& spec) {
  spec.validate();
  SynthResult out;
  out.hierarchy = complete_tree(spec.depth, spec.branching);
  const Hierarchy& h = out.hierarchy;

  out.truth.resize(h.size());
  for (NodeId n : h.preorder()) {
    Rng rng(derive_seed(spec.seed, {kParams, n}));
    const auto parent = h.parent(n);
    if (spec.family == Family::gaussian) {
      out.truth[n] = parent ? gaussian_child(rng, std::get<GaussianParams>(out.truth[*parent]),
                                             spec.perturbation)
                            : gaussian_root(rng, spec);
    } else {
      MultinomialParams p;
      p.logits = parent ? Eigen::VectorXd(std::get<MultinomialParams>(out.truth[*parent]).logits +
                                          normal_vector(rng, spec.dim, spec.perturbation))
                        : normal_vector(rng, spec.dim, spec.root_scale);
      out.truth[n] = p;
    }
  }

  out.train = HierarchyData(spec.family, spec.dim, h.size());
  out.test = HierarchyData(spec.family, spec.dim, h.size());
  const auto leaves = h.leaves();
  for (std::size_t rank = 0; rank < leaves.size(); ++rank) {
    const NodeId leaf = leaves[rank];
    Rng train_rng(derive_seed(spec.seed, {kTrain, leaf}));
    out.train.set(leaf, sample(train_rng, out.truth[leaf], spec, spec.train_count));
    const std::size_t nt = spec.test_count_for(rank, leaves.size());
    if (nt == 0) continue;
    Rng test_rng(derive_seed(spec.seed, {kTest, leaf}));
    out.test.set(leaf, sample(test_rng, out.truth[leaf], spec, nt));
  }
  return out;
}

HierarchyData take_prefix(const HierarchyData& data, std::size_t n) {
  HierarchyData out(data.family, data.dim, data.per_node.size());
  for (std::size_t node = 0; node < data.per_node.size(); ++node) {
    const Dataset* ds = data.find(node);
    if (!ds) continue;
    if (n > ds->size())
      throw std::invalid_argument("take_prefix: node has only " + std::to_string(ds->size()) +
                                  " instances, " + std::to_string(n) + " requested");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    out.set(node, ds->subset(idx));
  }
  return out;
}

}  // namespace hbt
