#include "hbt/hierarchy.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace hbt {

Hierarchy Hierarchy::build(std::span<const std::string> names,
                           std::span<const NamedEdge> edges) {
  if (names.empty()) throw std::invalid_argument("hierarchy: no nodes declared");

  Hierarchy h;
  std::unordered_map<std::string, NodeId> ids;
  h.nodes_.reserve(names.size());
  for (const auto& name : names) {
    if (name.empty()) throw std::invalid_argument("hierarchy: empty node name");
    if (!ids.emplace(name, h.nodes_.size()).second)
      throw std::invalid_argument("hierarchy: duplicate node name '" + name + "'");
    h.nodes_.push_back(Node{name, std::nullopt, {}});
  }

  auto lookup = [&](const std::string& name) {
    auto it = ids.find(name);
    if (it == ids.end())
      throw std::invalid_argument("hierarchy: edge references unknown node '" +
                                  name + "'");
    return it->second;
  };

  for (const auto& [child_name, parent_name] : edges) {
    const NodeId child = lookup(child_name);
    const NodeId parent = lookup(parent_name);
    if (child == parent)
      throw std::invalid_argument("hierarchy: cycle detected at '" + child_name + "'");
    if (h.nodes_[child].parent)
      throw std::invalid_argument("hierarchy: node '" + child_name +
                                  "' has more than one parent");
    h.nodes_[child].parent = parent;
  }

  // Cycle check first: a cycle with no external root would otherwise surface
  // as a misleading root-count error.
  for (NodeId start = 0; start < h.nodes_.size(); ++start) {
    NodeId cur = start;
    std::size_t steps = 0;
    while (h.nodes_[cur].parent) {
      cur = *h.nodes_[cur].parent;
      if (++steps > h.nodes_.size())
        throw std::invalid_argument("hierarchy: cycle detected through '" +
                                    h.nodes_[start].name + "'");
    }
  }

  std::vector<NodeId> roots;
  for (NodeId id = 0; id < h.nodes_.size(); ++id)
    if (!h.nodes_[id].parent) roots.push_back(id);
  if (roots.size() != 1)
    throw std::invalid_argument("hierarchy: expected exactly one root, found " +
                                std::to_string(roots.size()));
  h.root_ = roots.front();

  for (NodeId id = 0; id < h.nodes_.size(); ++id)
    if (h.nodes_[id].parent) h.nodes_[*h.nodes_[id].parent].children.push_back(id);

  h.depth_.assign(h.nodes_.size(), 0);
  std::vector<NodeId> stack{h.root_};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    h.preorder_.push_back(id);
    const auto& kids = h.nodes_[id].children;
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
      h.depth_[*it] = h.depth_[id] + 1;
      stack.push_back(*it);
    }
  }
  if (h.preorder_.size() != h.nodes_.size())
    throw std::invalid_argument("hierarchy: not every node is reachable from the root");

  for (NodeId id = 0; id < h.nodes_.size(); ++id)
    if (h.nodes_[id].children.empty()) h.leaves_.push_back(id);
  return h;
}

std::vector<NodeId> Hierarchy::internal_nodes() const {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < nodes_.size(); ++id)
    if (!nodes_[id].children.empty()) out.push_back(id);
  return out;
}

std::optional<NodeId> Hierarchy::find(std::string_view name) const {
  for (NodeId id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].name == name) return id;
  return std::nullopt;
}

NodeId Hierarchy::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw std::invalid_argument("hierarchy: unknown node '" + std::string(name) + "'");
}

std::size_t Hierarchy::max_depth() const {
  return *std::max_element(depth_.begin(), depth_.end());
}

std::vector<NodeId> Hierarchy::descendant_leaves(NodeId id) const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    if (is_leaf(cur)) out.push_back(cur);
    for (NodeId c : nodes_[cur].children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<NodeId, NodeId>> Hierarchy::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].parent) out.emplace_back(id, *nodes_[id].parent);
  return out;
}

std::vector<NamedEdge> Hierarchy::named_edges() const {
  std::vector<NamedEdge> out;
  for (auto [child, parent] : edges()) out.emplace_back(name(child), name(parent));
  return out;
}

std::vector<std::string> Hierarchy::names() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.name);
  return out;
}

Hierarchy build_hierarchy(const std::vector<NamedEdge>& edges,
                          const std::vector<std::string>& names) {
  return Hierarchy::build(names, edges);
}

std::vector<NodeId> leaves(const Hierarchy& h) { return h.leaves(); }

}  // namespace hbt
