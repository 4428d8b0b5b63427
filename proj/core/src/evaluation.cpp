#include "hbt/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hbt/transfer_objective.hpp"

namespace hbt {

namespace {
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace

NodeParams node_params(const ParamState& state, Family family, NodeId node) {
  if (family == Family::gaussian) return gaussian_params(state, node);
  return multinomial_params(state, node);
}

double dataset_loglik(const NodeParams& params, const Dataset& data) {
  if (const auto* g = std::get_if<GaussianParams>(&params)) {
    if (data.family != Family::gaussian || data.dim != g->dim())
      throw std::invalid_argument("evaluation: dataset does not match Gaussian model dimension");
    return gaussian_loglik(gaussian_stats(data.rows), *g);
  }
  const auto& m = std::get<MultinomialParams>(params);
  if (data.family != Family::multinomial || data.dim != static_cast<std::size_t>(m.logits.size()))
    throw std::invalid_argument("evaluation: dataset does not match model vocabulary");
  const Eigen::VectorXd log_probs = log_normalize(m.logits);
  double total = 0.0;
  for (const auto& doc : data.docs) total += nb_doc_loglik(doc, log_probs);
  return total;
}

double test_loglik(const NodeParams& params, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("test_loglik: empty test set");
  return dataset_loglik(params, data) / (static_cast<double>(data.size()) * std::numbers::ln2);
}

std::size_t classify(const SparseDoc& doc, std::span<const MultinomialParams> classes,
                     std::span<const double> log_priors) {
  if (classes.empty()) throw std::invalid_argument("classify: no classes");
  if (log_priors.size() != classes.size())
    throw std::invalid_argument("classify: prior count does not match class count");
  auto score = [&](std::size_t c) {
    return nb_doc_loglik(doc, log_normalize(classes[c].logits)) + log_priors[c];
  };
  std::size_t best = 0;
  double best_score = score(0);
  for (std::size_t c = 1; c < classes.size(); ++c) {
    const double s = score(c);
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

std::vector<double> class_log_priors(std::span<const double> counts, bool uniform) {
  std::vector<double> out(counts.size());
  double total = 0.0;
  for (double c : counts) total += c;
  for (std::size_t i = 0; i < counts.size(); ++i)
    out[i] = uniform || total <= 0.0 ? -std::log(static_cast<double>(counts.size()))
                                     : std::log(counts[i] / total);
  return out;
}

double accuracy(std::span<const LabeledDoc> docs, std::span<const MultinomialParams> classes,
                std::span<const double> log_priors) {
  if (docs.empty()) throw std::invalid_argument("accuracy: no documents");
  // Normalize once rather than per document.
  std::vector<MultinomialParams> normalized;
  normalized.reserve(classes.size());
  for (const auto& c : classes) normalized.push_back({log_normalize(c.logits)});
  std::size_t hits = 0;
  for (const auto& d : docs)
    if (classify(d.doc, normalized, log_priors) == d.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(docs.size());
}

void EvalReport::set_baseline(const EvalReport& baseline) {
  for (auto& row : rows)
    for (const auto& b : baseline.rows)
      if (b.cls == row.cls) row.delta_bits = row.bits_per_instance - b.bits_per_instance;
  if (accuracy && baseline.accuracy) accuracy_delta = *accuracy - *baseline.accuracy;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "method\tclass\tN\tn_test\tnats_per_instance\tbits_per_instance\tdelta_bits\n";
  for (const auto& r : rows) {
    out << r.method << '\t' << r.cls << '\t' << r.n_train << '\t' << r.n_test << '\t'
        << fmt(r.nats_per_instance) << '\t' << fmt(r.bits_per_instance) << '\t'
        << (r.delta_bits ? fmt(*r.delta_bits) : std::string("-")) << '\n';
  }
  if (accuracy) {
    out << "# accuracy\t" << fmt(*accuracy);
    if (accuracy_delta) out << "\tdelta\t" << fmt(*accuracy_delta);
    out << '\n';
  }
  if (vocabulary_size) out << "# vocabulary\t" << *vocabulary_size << '\n';
  return out.str();
}

}  // namespace hbt
