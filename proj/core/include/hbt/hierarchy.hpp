#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hbt {

using NodeId = std::size_t;

struct Node {
  std::string name;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
};

using NamedEdge = std::pair<std::string, std::string>;  // (child, parent)

/// Rooted tree of named classes. Immutable once built; node ids follow the
/// order of the declared names.
class Hierarchy {
 public:
  /// Validates and builds the tree. Throws std::invalid_argument on duplicate
  /// or empty names, unknown names in edges, a node with two parents, multiple
  /// roots, or a cycle.
  static Hierarchy build(std::span<const std::string> names,
                         std::span<const NamedEdge> edges);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::string& name(NodeId id) const { return nodes_.at(id).name; }
  NodeId root() const { return root_; }
  std::optional<NodeId> parent(NodeId id) const { return nodes_.at(id).parent; }
  const std::vector<NodeId>& children(NodeId id) const {
    return nodes_.at(id).children;
  }
  bool is_leaf(NodeId id) const { return nodes_.at(id).children.empty(); }

  /// Leaves in ascending id order.
  const std::vector<NodeId>& leaves() const { return leaves_; }
  /// Nodes with at least one child, ascending id order.
  std::vector<NodeId> internal_nodes() const;
  /// Root first; every parent precedes its children.
  const std::vector<NodeId>& preorder() const { return preorder_; }

  std::optional<NodeId> find(std::string_view name) const;
  /// Like find() but throws std::invalid_argument for unknown names.
  NodeId id_of(std::string_view name) const;

  std::size_t depth(NodeId id) const { return depth_.at(id); }
  std::size_t max_depth() const;
  std::vector<NodeId> descendant_leaves(NodeId id) const;

  /// (child, parent) pairs in ascending child-id order.
  std::vector<std::pair<NodeId, NodeId>> edges() const;
  std::vector<NamedEdge> named_edges() const;
  std::vector<std::string> names() const;

 private:
  std::vector<Node> nodes_;
  NodeId root_ = 0;
  std::vector<NodeId> leaves_;
  std::vector<NodeId> preorder_;
  std::vector<std::size_t> depth_;
};

/// Convenience overload taking initializer-friendly containers.
Hierarchy build_hierarchy(const std::vector<NamedEdge>& edges,
                          const std::vector<std::string>& names);

std::vector<NodeId> leaves(const Hierarchy& h);

}  // namespace hbt
