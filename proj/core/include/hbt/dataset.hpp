#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hbt/hierarchy.hpp"
#include "hbt/param_index.hpp"

namespace hbt {

/// Bag-of-words document: parallel arrays of word ids and counts, ids sorted.
struct SparseDoc {
  std::vector<std::uint32_t> ids;
  std::vector<double> counts;

  double total() const;
  Eigen::VectorXd dense(std::size_t vocab) const;
};

/// Instances observed for one class. Gaussian instances are rows of `rows`;
/// multinomial instances are documents.
struct Dataset {
  Family family = Family::gaussian;
  std::size_t dim = 0;
  Eigen::MatrixXd rows;
  std::vector<SparseDoc> docs;

  static Dataset gaussian(Eigen::MatrixXd rows);
  static Dataset documents(std::size_t vocab, std::vector<SparseDoc> docs);

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Appends other's instances; families and dims must agree.
  void append(const Dataset& other);
};

/// Optional dataset per hierarchy node. Leaves are expected to carry data;
/// internal nodes may carry data which then contributes a likelihood term.
struct HierarchyData {
  Family family = Family::gaussian;
  std::size_t dim = 0;
  std::vector<std::optional<Dataset>> per_node;

  HierarchyData() = default;
  HierarchyData(Family family, std::size_t dim, std::size_t node_count);

  const Dataset* find(NodeId node) const {
    return per_node.at(node) ? &*per_node.at(node) : nullptr;
  }
  void set(NodeId node, Dataset data);
  /// Concatenation of the data of every leaf under `node` (plus any data
  /// attached to internal nodes on the way).
  Dataset pooled(const Hierarchy& h, NodeId node) const;
  /// Throws std::invalid_argument when a leaf has no data.
  void require_leaf_data(const Hierarchy& h) const;
};

}  // namespace hbt
