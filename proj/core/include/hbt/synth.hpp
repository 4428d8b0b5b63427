#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "hbt/dataset.hpp"
#include "hbt/evaluation.hpp"
#include "hbt/hierarchy.hpp"
#include "hbt/param_index.hpp"

namespace hbt {

/// Synthetic transfer problem: a complete tree whose node parameters are
/// random walks from a random root, with data sampled at the leaves.
struct SynthSpec {
  Family family = Family::gaussian;
  std::size_t depth = 1;      // edges from root to every leaf
  std::size_t branching = 2;
  std::size_t dim = 10;       // Gaussian dimension or vocabulary size
  double perturbation = 0.1;  // parent-to-child jitter scale
  std::size_t train_count = 5;  // per leaf
  std::size_t test_count = 20;  // per leaf, unless test_total is set
  std::optional<std::size_t> test_total;  // spread round-robin over leaves
  std::size_t doc_length = 50;  // tokens per document
  double root_scale = 1.0;      // spread of the root mean / logits
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t test_count_for(std::size_t leaf_rank, std::size_t leaf_count) const;
};

struct SynthResult {
  Hierarchy hierarchy;
  HierarchyData train;
  HierarchyData test;
  std::vector<NodeParams> truth;  // per node
};

/// Root named "root"; children "n0", "n1", ...; grandchildren "n0_0", ...
Hierarchy complete_tree(std::size_t depth, std::size_t branching);

/// Gaussian root: mean ~ N(0, root_scale^2), covariance A A^T / d + I / 2.
/// Child mean = parent + s z; child precision = D K D with
/// D = diag(exp(s z' / 2)), so each diagonal log-precision moves by s z'.
/// Multinomial child logits = parent + s z. Training sets are drawn as
/// prefixes of one stream per leaf, so a smaller train_count yields a prefix
/// of a larger one under the same seed.
SynthResult synthesize(const SynthSpec& spec);

/// First n training instances of every node that has data.
HierarchyData take_prefix(const HierarchyData& data, std::size_t n);

}  // namespace hbt
