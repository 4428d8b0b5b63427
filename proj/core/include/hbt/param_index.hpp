#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hbt/hierarchy.hpp"

namespace hbt {

enum class Family { gaussian, multinomial };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct GroupSpec {
  std::string label;
  std::size_t size = 0;
};

/// Gaussian: "mean" (d) and "precision" (upper triangle, d(d+1)/2).
std::vector<GroupSpec> gaussian_groups(std::size_t dim);
/// Multinomial: one "logits" block over the vocabulary.
std::vector<GroupSpec> multinomial_groups(std::size_t vocab);
std::vector<GroupSpec> family_groups(Family family, std::size_t dim);

struct Block {
  NodeId node = 0;
  std::size_t group = 0;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat coordinate layout for all (node, group) parameter blocks. Node-major:
/// node n owns [n * node_dim, (n + 1) * node_dim), groups in declared order.
class ParamIndex {
 public:
  ParamIndex() = default;
  ParamIndex(std::size_t node_count, std::vector<GroupSpec> groups);

  std::size_t total_dim() const { return node_count_ * node_dim_; }
  std::size_t node_dim() const { return node_dim_; }
  std::size_t node_count() const { return node_count_; }
  const std::vector<GroupSpec>& groups() const { return groups_; }

  std::size_t group_index(std::string_view label) const;
  /// Offset of a group within a node's local block.
  std::size_t group_offset(std::size_t group) const { return group_offsets_.at(group); }
  std::size_t node_offset(NodeId node) const { return node * node_dim_; }

  Block block(NodeId node, std::size_t group) const;
  std::size_t coord(NodeId node, std::size_t group, std::size_t within) const;

  struct Location {
    NodeId node;
    std::size_t group;
    std::size_t within;
  };
  Location locate(std::size_t coord) const;
  /// Group owning a node-local coordinate.
  std::size_t group_of_local(std::size_t local) const;

 private:
  std::size_t node_count_ = 0;
  std::size_t node_dim_ = 0;
  std::vector<GroupSpec> groups_;
  std::vector<std::size_t> group_offsets_;
};

/// Throws std::invalid_argument when any group is zero-dimensional.
ParamIndex layout(const Hierarchy& h, const std::vector<GroupSpec>& groups);
ParamIndex layout(const Hierarchy& h, Family family, std::size_t dim);

/// Flat vector of all free parameters across the hierarchy.
struct ParamState {
  ParamIndex index;
  Eigen::VectorXd values;

  auto node_block(NodeId node) {
    return values.segment(static_cast<Eigen::Index>(index.node_offset(node)),
                          static_cast<Eigen::Index>(index.node_dim()));
  }
  auto node_block(NodeId node) const {
    return values.segment(static_cast<Eigen::Index>(index.node_offset(node)),
                          static_cast<Eigen::Index>(index.node_dim()));
  }
  auto group_block(NodeId node, std::size_t group) const {
    const Block b = index.block(node, group);
    return values.segment(static_cast<Eigen::Index>(b.offset),
                          static_cast<Eigen::Index>(b.size));
  }
};

}  // namespace hbt
