#include "hbt/param_index.hpp"

#include <algorithm>
#include <stdexcept>

namespace hbt {

std::string_view to_string(Family f) {
  return f == Family::gaussian ? "gaussian" : "multinomial";
}

Family family_from_string(std::string_view s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "multinomial") return Family::multinomial;
  throw std::invalid_argument("unknown model family '" + std::string(s) + "'");
}

std::vector<GroupSpec> gaussian_groups(std::size_t dim) {
  return {{"mean", dim}, {"precision", dim * (dim + 1) / 2}};
}

std::vector<GroupSpec> multinomial_groups(std::size_t vocab) {
  return {{"logits", vocab}};
}

std::vector<GroupSpec> family_groups(Family family, std::size_t dim) {
  return family == Family::gaussian ? gaussian_groups(dim) : multinomial_groups(dim);
}

ParamIndex::ParamIndex(std::size_t node_count, std::vector<GroupSpec> groups)
    : node_count_(node_count), groups_(std::move(groups)) {
  if (groups_.empty()) throw std::invalid_argument("layout: no parameter groups");
  for (const auto& g : groups_) {
    if (g.size == 0)
      throw std::invalid_argument("layout: zero-dimensional group '" + g.label + "'");
    group_offsets_.push_back(node_dim_);
    node_dim_ += g.size;
  }
}

std::size_t ParamIndex::group_index(std::string_view label) const {
  for (std::size_t g = 0; g < groups_.size(); ++g)
    if (groups_[g].label == label) return g;
  throw std::invalid_argument("layout: unknown group '" + std::string(label) + "'");
}

Block ParamIndex::block(NodeId node, std::size_t group) const {
  if (node >= node_count_ || group >= groups_.size())
    throw std::out_of_range("layout: block out of range");
  return Block{node, group, node_offset(node) + group_offsets_[group],
               groups_[group].size};
}

std::size_t ParamIndex::coord(NodeId node, std::size_t group, std::size_t within) const {
  const Block b = block(node, group);
  if (within >= b.size) throw std::out_of_range("layout: coordinate out of range");
  return b.offset + within;
}

std::size_t ParamIndex::group_of_local(std::size_t local) const {
  auto it = std::upper_bound(group_offsets_.begin(), group_offsets_.end(), local);
  return static_cast<std::size_t>(it - group_offsets_.begin()) - 1;
}

ParamIndex::Location ParamIndex::locate(std::size_t c) const {
  if (c >= total_dim()) throw std::out_of_range("layout: coordinate out of range");
  const NodeId node = c / node_dim_;
  const std::size_t local = c % node_dim_;
  const std::size_t group = group_of_local(local);
  return Location{node, group, local - group_offsets_[group]};
}

ParamIndex layout(const Hierarchy& h, const std::vector<GroupSpec>& groups) {
  return ParamIndex(h.size(), groups);
}

ParamIndex layout(const Hierarchy& h, Family family, std::size_t dim) {
  return ParamIndex(h.size(), family_groups(family, dim));
}

}  // namespace hbt
