#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "hbt/dataset.hpp"
#include "hbt/hierarchy.hpp"
#include "hbt/param_index.hpp"
#include "test_support.hpp"

using namespace hbt;

TEST(Hierarchy, TwoLeafTree) {
  const Hierarchy h = build_hierarchy({{"a", "root"}, {"b", "root"}}, {"root", "a", "b"});
  EXPECT_EQ(h.size(), 3u);
  EXPECT_EQ(h.name(h.root()), "root");
  EXPECT_EQ(h.leaves(), (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(h.parent(1), std::optional<NodeId>(0));
  EXPECT_FALSE(h.parent(0).has_value());
  EXPECT_EQ(h.depth(2), 1u);
  EXPECT_EQ(h.internal_nodes(), (std::vector<NodeId>{0}));
}

TEST(Hierarchy, RootNeedNotBeFirst) {
  const Hierarchy h = build_hierarchy({{"x", "top"}, {"y", "top"}}, {"x", "y", "top"});
  EXPECT_EQ(h.root(), 2u);
  EXPECT_EQ(h.preorder().front(), 2u);
  EXPECT_EQ(h.leaves(), (std::vector<NodeId>{0, 1}));
}

TEST(Hierarchy, SingleNodeIsRootAndLeaf) {
  const Hierarchy h = build_hierarchy({}, {"only"});
  EXPECT_EQ(h.root(), 0u);
  EXPECT_TRUE(h.is_leaf(0));
  EXPECT_EQ(h.leaves().size(), 1u);
}

TEST(Hierarchy, RejectsCycle) {
  EXPECT_THROW(build_hierarchy({{"a", "b"}, {"b", "a"}}, {"a", "b"}), std::invalid_argument);
}

TEST(Hierarchy, RejectsSelfEdge) {
  EXPECT_THROW(build_hierarchy({{"a", "a"}}, {"a"}), std::invalid_argument);
}

TEST(Hierarchy, RejectsTwoParents) {
  EXPECT_THROW(build_hierarchy({{"c", "a"}, {"c", "b"}, {"b", "a"}}, {"a", "b", "c"}),
               std::invalid_argument);
}

TEST(Hierarchy, RejectsTwoRoots) {
  EXPECT_THROW(build_hierarchy({{"c", "a"}}, {"a", "b", "c"}), std::invalid_argument);
}

TEST(Hierarchy, RejectsUnknownAndDuplicateNames) {
  EXPECT_THROW(build_hierarchy({{"c", "zzz"}}, {"a", "c"}), std::invalid_argument);
  EXPECT_THROW(build_hierarchy({}, {"a", "a"}), std::invalid_argument);
  EXPECT_THROW(build_hierarchy({}, {""}), std::invalid_argument);
  EXPECT_THROW(build_hierarchy({}, {}), std::invalid_argument);
}

TEST(Hierarchy, PreorderParentsFirstOnRandomTrees) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Hierarchy h = fx::random_tree(2 + uniform_index(rng, 12), rng);
    std::vector<std::size_t> pos(h.size());
    for (std::size_t k = 0; k < h.preorder().size(); ++k) pos[h.preorder()[k]] = k;
    EXPECT_EQ(h.preorder().size(), h.size());
    for (auto [c, p] : h.edges()) {
      EXPECT_LT(pos[p], pos[c]);
      EXPECT_EQ(h.depth(c), h.depth(p) + 1);
    }
    // Leaves under the root are all leaves.
    auto all = h.descendant_leaves(h.root());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, h.leaves());
  }
}

TEST(Hierarchy, NamedEdgesRoundTrip) {
  const Hierarchy h = fx::chain_tree();
  const Hierarchy again = Hierarchy::build(h.names(), h.named_edges());
  EXPECT_EQ(again.names(), h.names());
  EXPECT_EQ(again.edges(), h.edges());
  EXPECT_EQ(h.max_depth(), 2u);
  EXPECT_EQ(h.id_of("mid"), 1u);
  EXPECT_THROW(h.id_of("nope"), std::invalid_argument);
}

TEST(ParamIndex, GaussianLayout) {
  const Hierarchy h = fx::two_leaf_tree();
  const ParamIndex idx = layout(h, Family::gaussian, 3);
  EXPECT_EQ(idx.node_dim(), 3u + 6u);
  EXPECT_EQ(idx.total_dim(), 27u);
  EXPECT_EQ(idx.group_index("precision"), 1u);
  EXPECT_EQ(idx.coord(2, 1, 0), 2u * 9u + 3u);
  const auto loc = idx.locate(idx.coord(1, 1, 4));
  EXPECT_EQ(loc.node, 1u);
  EXPECT_EQ(loc.group, 1u);
  EXPECT_EQ(loc.within, 4u);
  EXPECT_EQ(idx.group_of_local(2), 0u);
  EXPECT_EQ(idx.group_of_local(3), 1u);
}

TEST(ParamIndex, CoordinatesAreABijection) {
  const Hierarchy h = fx::chain_tree();
  const ParamIndex idx = layout(h, Family::gaussian, 4);
  std::set<std::size_t> seen;
  for (NodeId n = 0; n < h.size(); ++n)
    for (std::size_t g = 0; g < idx.groups().size(); ++g)
      for (std::size_t w = 0; w < idx.groups()[g].size; ++w) {
        const std::size_t c = idx.coord(n, g, w);
        EXPECT_TRUE(seen.insert(c).second);
        const auto loc = idx.locate(c);
        EXPECT_EQ(loc.node, n);
        EXPECT_EQ(loc.group, g);
        EXPECT_EQ(loc.within, w);
      }
  EXPECT_EQ(seen.size(), idx.total_dim());
}

TEST(ParamIndex, RejectsEmptyGroup) {
  const Hierarchy h = fx::two_leaf_tree();
  EXPECT_THROW(layout(h, Family::multinomial, 0), std::invalid_argument);
}

TEST(Dataset, PooledConcatenatesDescendantLeaves) {
  const Hierarchy h = fx::chain_tree();
  HierarchyData data(Family::gaussian, 2, h.size());
  Eigen::MatrixXd rows(2, 2);
  rows << 1, 2, 3, 4;
  data.set(2, Dataset::gaussian(rows));
  EXPECT_EQ(data.pooled(h, 0).size(), 2u);
  EXPECT_EQ(data.pooled(h, 2).rows, rows);
  EXPECT_NO_THROW(data.require_leaf_data(h));
  HierarchyData missing(Family::gaussian, 2, h.size());
  EXPECT_THROW(missing.require_leaf_data(h), std::invalid_argument);
}

TEST(Dataset, SubsetAndAppend) {
  Rng rng(1);
  Dataset d = Dataset::documents(5, fx::random_docs(rng, 4, 5, 3));
  const std::vector<std::size_t> idx{3, 0};
  const Dataset s = d.subset(idx);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.docs[0].ids, d.docs[3].ids);
  d.append(s);
  EXPECT_EQ(d.size(), 6u);
  EXPECT_THROW(d.append(Dataset::gaussian(Eigen::MatrixXd::Zero(1, 5))), std::invalid_argument);
}
