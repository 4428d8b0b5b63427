#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hbt/dataset.hpp"
#include "hbt/likelihoods.hpp"
#include "hbt/param_index.hpp"

namespace hbt {

using NodeParams = std::variant<GaussianParams, MultinomialParams>;

/// Parameters of one node of a flat state, typed by family.
NodeParams node_params(const ParamState& state, Family family, NodeId node);

/// Total log-likelihood of a dataset in nats. Gaussian instances are rows;
/// multinomial instances are documents scored as bags of words.
double dataset_loglik(const NodeParams& params, const Dataset& data);

/// Held-out log-likelihood in bits per instance. Throws on an empty test set.
double test_loglik(const NodeParams& params, const Dataset& data);

/// argmax over classes of doc log-likelihood plus log prior; ties go to the
/// smallest class index.
std::size_t classify(const SparseDoc& doc, std::span<const MultinomialParams> classes,
                     std::span<const double> log_priors);

/// log(count_c / total), or uniform when `uniform` is set.
std::vector<double> class_log_priors(std::span<const double> counts, bool uniform);

struct LabeledDoc {
  std::size_t label = 0;
  SparseDoc doc;
};

/// Fraction of documents whose predicted class equals the label.
double accuracy(std::span<const LabeledDoc> docs, std::span<const MultinomialParams> classes,
                std::span<const double> log_priors);

struct EvalRow {
  std::string method;
  std::string cls;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double nats_per_instance = 0.0;
  double bits_per_instance = 0.0;
  std::optional<double> delta_bits;  // vs the baseline row of the same class
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::optional<double> accuracy;
  std::optional<double> accuracy_delta;
  std::optional<std::size_t> vocabulary_size;

  /// Fills delta_bits (and accuracy_delta) against another report's rows
  /// matched by class name.
  void set_baseline(const EvalReport& baseline);
  /// Tab-separated table, one row per method x class x N.
  std::string to_table() const;
};

}  // namespace hbt
