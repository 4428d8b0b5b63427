#include "hbt/dataset.hpp"

#include <numeric>
#include <stdexcept>

namespace hbt {

double SparseDoc::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0.0);
}

Eigen::VectorXd SparseDoc::dense(std::size_t vocab) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= vocab) throw std::invalid_argument("document word id exceeds vocabulary");
    out[ids[k]] += counts[k];
  }
  return out;
}

Dataset Dataset::gaussian(Eigen::MatrixXd rows) {
  Dataset d;
  d.family = Family::gaussian;
  d.dim = static_cast<std::size_t>(rows.cols());
  d.rows = std::move(rows);
  return d;
}

Dataset Dataset::documents(std::size_t vocab, std::vector<SparseDoc> docs) {
  Dataset d;
  d.family = Family::multinomial;
  d.dim = vocab;
  d.docs = std::move(docs);
  return d;
}

std::size_t Dataset::size() const {
  return family == Family::gaussian ? static_cast<std::size_t>(rows.rows()) : docs.size();
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.family = family;
  out.dim = dim;
  if (family == Family::gaussian) {
    out.rows.resize(static_cast<Eigen::Index>(indices.size()), rows.cols());
    for (std::size_t k = 0; k < indices.size(); ++k)
      out.rows.row(static_cast<Eigen::Index>(k)) = rows.row(static_cast<Eigen::Index>(indices[k]));
  } else {
    out.docs.reserve(indices.size());
    for (std::size_t i : indices) out.docs.push_back(docs.at(i));
  }
  return out;
}

void Dataset::append(const Dataset& other) {
  if (other.family != family || other.dim != dim)
    throw std::invalid_argument("dataset append: family or dimension mismatch");
  if (family == Family::gaussian) {
    Eigen::MatrixXd merged(rows.rows() + other.rows.rows(), static_cast<Eigen::Index>(dim));
    merged << rows, other.rows;
    rows = std::move(merged);
  } else {
    docs.insert(docs.end(), other.docs.begin(), other.docs.end());
  }
}

HierarchyData::HierarchyData(Family f, std::size_t d, std::size_t node_count)
    : family(f), dim(d), per_node(node_count) {}

void HierarchyData::set(NodeId node, Dataset data) {
  if (data.family != family || data.dim != dim)
    throw std::invalid_argument("dataset does not match hierarchy data family/dimension");
  per_node.at(node) = std::move(data);
}

Dataset HierarchyData::pooled(const Hierarchy& h, NodeId node) const {
  Dataset out = family == Family::gaussian
                    ? Dataset::gaussian(Eigen::MatrixXd(0, static_cast<Eigen::Index>(dim)))
                    : Dataset::documents(dim, {});
  for (NodeId id : h.preorder()) {
    NodeId cur = id;
    bool under = cur == node;
    while (!under && h.parent(cur)) {
      cur = *h.parent(cur);
      under = cur == node;
    }
    if (under && per_node.at(id)) out.append(*per_node.at(id));
  }
  return out;
}

void HierarchyData::require_leaf_data(const Hierarchy& h) const {
  if (per_node.size() != h.size())
    throw std::invalid_argument("hierarchy data does not match hierarchy size");
  for (NodeId leaf : h.leaves())
    if (!per_node[leaf] || per_node[leaf]->empty())
      throw std::invalid_argument("missing data for leaf '" + h.name(leaf) + "'");
}

}  // namespace hbt
