#include <cmath>

#include <gtest/gtest.h>

#include "hbt/estimation.hpp"
#include "hbt/evaluation.hpp"
#include "hbt/transfer_objective.hpp"
#include "test_support.hpp"

using namespace hbt;
using fx::central_difference;
using fx::close_rel;

namespace {

using fx::Instance;
using fx::jittered_theta;
using fx::make_instance;
using fx::divergence;

// Data term computed per node from the plain density, plus the ridge or
// pseudocount contribution written out by hand.
double data_oracle(const Instance& in, const ParamState& state) {
  double total = 0.0;
  for (NodeId n = 0; n < in.h.size(); ++n) {
    const Dataset* ds = in.data.find(n);
    if (!ds || ds->empty()) continue;
    total += dataset_loglik(node_params(state, in.data.family, n), *ds);
    const double m = static_cast<double>(ds->size());
    if (in.data.family == Family::gaussian) {
      total -= 0.5 * m * in.config.alpha * gaussian_params(state, n).precision.trace();
    } else {
      const Eigen::VectorXd logp = log_normalize(multinomial_params(state, n).logits);
      total += in.config.alpha * logp.sum();
    }
  }
  return total;
}

}  // namespace

TEST(Penalty, SpecValues) {
  for (auto kind : {DivergenceKind::l2, DivergenceKind::l1_smoothed,
                    DivergenceKind::eps_insensitive})
    EXPECT_EQ(penalty(0.0, divergence(kind)).value, 0.0);
  EXPECT_EQ(penalty(2.0, {}).value, 4.0);
  DivergenceSpec eps{DivergenceKind::eps_insensitive, 1.0, 1e-3};
  EXPECT_EQ(penalty(0.5, eps).value, 0.0);
  EXPECT_EQ(penalty(3.0, eps).value, 4.0);
  DivergenceSpec l1{DivergenceKind::l1_smoothed, 0.0, 1e-3};
  EXPECT_NEAR(penalty(5.0, l1).value, std::sqrt(25.0 + 1e-6) - 1e-3, 1e-15);
  EXPECT_NEAR(penalty(5.0, l1).value, 4.999, 1e-6);
}

TEST(Penalty, RejectsBadSpec) {
  EXPECT_THROW((DivergenceSpec{DivergenceKind::l1_smoothed, 0.0, 0.0}.validate()),
               std::invalid_argument);
  EXPECT_THROW((DivergenceSpec{DivergenceKind::eps_insensitive, -1.0, 1e-3}.validate()),
               std::invalid_argument);
  EXPECT_THROW(divergence_from_string("kl"), std::invalid_argument);
}

TEST(Penalty, ConvexEvenNonnegative) {
  Rng rng(31);
  for (auto kind : {DivergenceKind::l2, DivergenceKind::l1_smoothed,
                    DivergenceKind::eps_insensitive}) {
    const DivergenceSpec s = divergence(kind);
    for (int i = 0; i < 200; ++i) {
      const double a = 3.0 * standard_normal(rng), b = 3.0 * standard_normal(rng);
      const double pa = penalty(a, s).value, pb = penalty(b, s).value;
      EXPECT_GE(pa, 0.0);
      EXPECT_EQ(pa, penalty(-a, s).value);
      EXPECT_LE(penalty(0.5 * (a + b), s).value, 0.5 * (pa + pb) + 1e-9);
      // derivative by central difference
      const double fd = (penalty(a + 1e-6, s).value - penalty(a - 1e-6, s).value) / 2e-6;
      EXPECT_TRUE(close_rel(penalty(a, s).derivative, fd, 1e-5, 1e-7));
    }
    if (kind == DivergenceKind::eps_insensitive) {
      EXPECT_EQ(penalty(s.epsilon, s).value, 0.0);
      EXPECT_EQ(penalty(-0.5 * s.epsilon, s).value, 0.0);
    }
  }
}

TEST(Perspective, JointlyConvex) {
  Rng rng(37);
  for (int i = 0; i < 200; ++i) {
    const double d1 = 2.0 * standard_normal(rng), d2 = 2.0 * standard_normal(rng);
    const double l1 = 0.01 + 3.0 * uniform01(rng), l2 = 0.01 + 3.0 * uniform01(rng);
    const double dm = 0.5 * (d1 + d2), lm = 0.5 * (l1 + l2);
    EXPECT_LE(dm * dm / lm, 0.5 * (d1 * d1 / l1 + d2 * d2 / l2) + 1e-9);
  }
}

TEST(TransferPenalty, HandComputed) {
  // One tied scalar: 1-d multinomial has one logit.
  const Hierarchy h = fx::two_leaf_tree();
  const ParamIndex idx = layout(h, Family::multinomial, 1);
  ParamState s{idx, Eigen::Vector3d(0.0, 2.0, 0.0)};
  ObjectiveConfig cfg;
  const TyingMask mask = TyingMask::for_family(h, Family::multinomial, 1);
  cfg.mask = mask;
  DotCoefficients dot =
      DotCoefficients::constant(h, idx, mask, DotGranularity::per_coordinate, 4.0);
  EXPECT_DOUBLE_EQ(transfer_penalty(s, h, dot, cfg), 1.0);
  s.values.setConstant(1.5);
  EXPECT_EQ(transfer_penalty(s, h, dot, cfg), 0.0);
}

TEST(TransferPenalty, ChainEnumeration) {
  const Hierarchy h = fx::chain_tree();
  const ParamIndex idx = layout(h, Family::multinomial, 2);
  ParamState s{idx, Eigen::VectorXd(6)};
  s.values << 0.0, 1.0, 0.5, -1.0, 2.0, 3.0;  // root, mid, leaf
  ObjectiveConfig cfg;
  cfg.beta = 2.0;
  const TyingMask mask = TyingMask::for_family(h, Family::multinomial, 2);
  cfg.mask = mask;
  DotCoefficients dot =
      DotCoefficients::constant(h, idx, mask, DotGranularity::per_coordinate, 1.0);
  dot.edge_for(1).lambda << 0.5, 2.0;
  dot.edge_for(2).lambda << 4.0, 1.0;
  const double mid = 0.25 / 0.5 + 4.0 / 2.0;
  const double leaf = 2.25 / 4.0 + 16.0 / 1.0;
  EXPECT_NEAR(transfer_penalty(s, h, dot, cfg), 2.0 * (mid + leaf), 1e-12);
}

TEST(TransferPenalty, UntiedCoordinatesFree) {
  const Hierarchy h = fx::two_leaf_tree();
  const ParamIndex idx = layout(h, Family::gaussian, 2);
  ParamState s{idx, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.total_dim()))};
  ObjectiveConfig cfg;
  cfg.mask = TyingMask::for_family(h, Family::gaussian, 2);
  const DotCoefficients dot =
      DotCoefficients::constant(h, idx, cfg.mask, DotGranularity::per_coordinate, 1.0);
  // off-diagonal precision entry of leaf a
  s.values[static_cast<Eigen::Index>(idx.coord(1, 1, 1))] = 5.0;
  EXPECT_EQ(transfer_penalty(s, h, dot, cfg), 0.0);
  EXPECT_EQ(dot.edge_for(1).slot[2 + 1], -1);
}

TEST(TransferPenalty, RelabelingInvariant) {
  Rng rng(41);
  const Hierarchy a = build_hierarchy({{"x", "r"}, {"y", "r"}, {"z", "x"}}, {"r", "x", "y", "z"});
  const Hierarchy b = build_hierarchy({{"x", "r"}, {"y", "r"}, {"z", "x"}}, {"z", "y", "x", "r"});
  const Eigen::VectorXd vals = fx::random_rows(rng, 1, 12).row(0).transpose();
  ParamState sa{layout(a, Family::multinomial, 3), vals};
  ParamState sb{layout(b, Family::multinomial, 3), vals};
  for (const std::string& name : a.names())
    sb.node_block(b.id_of(name)) = sa.node_block(a.id_of(name));
  ObjectiveConfig ca, cb;
  ca.mask = TyingMask::for_family(a, Family::multinomial, 3);
  cb.mask = TyingMask::for_family(b, Family::multinomial, 3);
  const auto da = DotCoefficients::constant(a, sa.index, ca.mask, DotGranularity::per_coordinate, 0.7);
  const auto db = DotCoefficients::constant(b, sb.index, cb.mask, DotGranularity::per_coordinate, 0.7);
  EXPECT_NEAR(transfer_penalty(sa, a, da, ca), transfer_penalty(sb, b, db, cb), 1e-12);
}

TEST(TransferPenalty, LambdaScaling) {
  Rng rng(43);
  const Instance in = make_instance(rng, Family::gaussian, 3, DivergenceKind::l2, DotMode::fixed, 5);
  ParamState s{layout(in.h, Family::gaussian, 3), jittered_theta(in, rng)};
  ObjectiveConfig cfg = in.config;
  cfg.mask = TyingMask::for_family(in.h, Family::gaussian, 3);
  const auto one = DotCoefficients::constant(in.h, s.index, cfg.mask, DotGranularity::per_coordinate, 1.0);
  const auto v = DotCoefficients::constant(in.h, s.index, cfg.mask, DotGranularity::per_coordinate, 2.5);
  EXPECT_NEAR(transfer_penalty(s, in.h, v, cfg), transfer_penalty(s, in.h, one, cfg) / 2.5, 1e-12);
  // and that equals the unweighted objective at beta / v
  ObjectiveConfig scaled = cfg;
  scaled.beta = cfg.beta / 2.5;
  EXPECT_NEAR(transfer_penalty(s, in.h, v, cfg), transfer_penalty(s, in.h, one, scaled), 1e-12);
}

TEST(TransferPenalty, RejectsBadLambda) {
  const Hierarchy h = fx::two_leaf_tree();
  const ParamIndex idx = layout(h, Family::multinomial, 2);
  ParamState s{idx, Eigen::VectorXd::Zero(6)};
  ObjectiveConfig cfg;
  cfg.mask = TyingMask::for_family(h, Family::multinomial, 2);
  auto dot = DotCoefficients::constant(h, idx, cfg.mask, DotGranularity::per_coordinate, 1.0);
  dot.edge_for(1).lambda[0] = 0.0;
  EXPECT_THROW(transfer_penalty(s, h, dot, cfg), std::invalid_argument);
  dot.edge_for(1).lambda[0] = 1.0;
  dot.edge_for(1).slot[1] = -1;
  EXPECT_THROW(transfer_penalty(s, h, dot, cfg), std::invalid_argument);
}

TEST(Hyperprior, SpecValues) {
  const Hierarchy h = fx::two_leaf_tree();
  const ParamIndex idx = layout(h, Family::multinomial, 1);
  const TyingMask mask = TyingMask::for_family(h, Family::multinomial, 1);
  auto dot = DotCoefficients::constant(h, idx, mask, DotGranularity::per_coordinate, 1.0);
  HyperpriorSpec prior = HyperpriorSpec::with_mean(dot);  // a = 2, b = 1
  EXPECT_EQ(prior.shape, 2.0);
  EXPECT_DOUBLE_EQ(hyperprior_term(dot, prior), 2.0);  // two edges, 1 each

  // minimizer of (a+1) log l + b / l is b / (a+1)
  const double mode = 1.0 / 3.0;
  for (double l : {mode * 0.9, mode * 1.1}) {
    auto other = dot;
    for (auto& e : other.edges()) e.lambda.setConstant(l);
    auto at_mode = dot;
    for (auto& e : at_mode.edges()) e.lambda.setConstant(mode);
    EXPECT_GT(hyperprior_term(other, prior), hyperprior_term(at_mode, prior));
  }
  EXPECT_THROW(HyperpriorSpec::with_mean(dot, 1.0), std::invalid_argument);
}

TEST(Hyperprior, MatchesDensityUpToConstant) {
  Rng rng(47);
  for (int i = 0; i < 20; ++i) {
    const double a = 1.5 + 3.0 * uniform01(rng), b = 0.1 + 2.0 * uniform01(rng);
    const double l = 0.05 + 3.0 * uniform01(rng);
    // inverse-Gamma log density
    const double logpdf = a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(l) - b / l;
    const double constant = a * std::log(b) - std::lgamma(a);
    const Hierarchy h = build_hierarchy({{"c", "p"}}, {"p", "c"});
    const ParamIndex idx = layout(h, Family::multinomial, 1);
    const TyingMask mask = TyingMask::for_family(h, Family::multinomial, 1);
    auto dot = DotCoefficients::constant(h, idx, mask, DotGranularity::per_coordinate, l);
    HyperpriorSpec prior{a, {Eigen::VectorXd::Constant(1, b)}};
    EXPECT_NEAR(hyperprior_term(dot, prior), -(logpdf - constant), 1e-12);
  }
}

TEST(JointObjective, ComponentOracle) {
  Rng rng(53);
  for (Family family : {Family::gaussian, Family::multinomial}) {
    for (DotMode mode : {DotMode::fixed, DotMode::hyperprior}) {
      const Instance in = make_instance(rng, family, 3, DivergenceKind::l2, mode, 5);
      const TransferObjective obj(in.h, in.data, in.config, in.dot);
      const Eigen::VectorXd theta = jittered_theta(in, rng);
      const Eigen::VectorXd x = obj.pack(theta);
      const ParamState state{obj.index(), theta};
      ObjectiveConfig cfg = in.config;
      cfg.mask = TyingMask::for_family(in.h, family, 3);
      double expect = -data_oracle(in, state) + transfer_penalty(state, in.h, in.dot, cfg);
      if (mode == DotMode::hyperprior)
        expect += hyperprior_term(in.dot, HyperpriorSpec::with_mean(in.dot));
      EXPECT_NEAR(joint_objective(obj, x), expect, 1e-9 * std::abs(expect));
    }
  }
}

TEST(JointObjective, BetaZeroAndEqualParameters) {
  Rng rng(59);
  for (Family family : {Family::gaussian, Family::multinomial}) {
    Instance in = make_instance(rng, family, 3, DivergenceKind::l2, DotMode::fixed, 4);
    in.config.beta = 0.0;
    const TransferObjective obj(in.h, in.data, in.config, in.dot);
    const Eigen::VectorXd theta = jittered_theta(in, rng);
    const ParamState state{obj.index(), theta};
    EXPECT_NEAR(obj.value(theta), -data_oracle(in, state), 1e-9 * std::abs(obj.value(theta)));
    // gradient is zero on internal nodes without data
    const Eigen::VectorXd g = obj.gradient(theta);
    for (NodeId n : in.h.internal_nodes())
      EXPECT_TRUE(g.segment(static_cast<Eigen::Index>(obj.index().node_offset(n)),
                            static_cast<Eigen::Index>(obj.index().node_dim()))
                      .isZero());

    // every node at the same value: penalty vanishes
    in.config.beta = 3.0;
    const TransferObjective tied(in.h, in.data, in.config, in.dot);
    ParamState same{obj.index(), theta};
    for (NodeId n = 1; n < in.h.size(); ++n) same.node_block(n) = state.node_block(0);
    EXPECT_NEAR(tied.value(same.values), -data_oracle(in, same), 1e-9 * std::abs(tied.value(same.values)));
  }
}

TEST(JointGradient, FiniteDifferenceAllModes) {
  Rng rng(61);
  int checked = 0;
  for (Family family : {Family::gaussian, Family::multinomial}) {
    for (DivergenceKind kind : {DivergenceKind::l2, DivergenceKind::l1_smoothed,
                                DivergenceKind::eps_insensitive}) {
      for (DotMode mode : {DotMode::none, DotMode::fixed, DotMode::hyperprior}) {
        const std::size_t dim = family == Family::gaussian ? 2 : 5;
        const Instance in = make_instance(rng, family, dim, kind, mode, 3 + uniform_index(rng, 3));
        const TransferObjective obj(in.h, in.data, in.config, in.dot);
        const Eigen::VectorXd x = obj.pack(jittered_theta(in, rng));
        const Eigen::VectorXd g = obj.gradient(x);
        const Eigen::VectorXd fd = central_difference(
            [&](const Eigen::VectorXd& v) { return obj.value(v); }, x, 1e-5);
        for (Eigen::Index i = 0; i < g.size(); ++i)
          EXPECT_TRUE(close_rel(g[i], fd[i], 1e-5, 1e-8))
              << to_string(kind) << " " << to_string(mode) << " i=" << i << " " << g[i]
              << " vs " << fd[i];
        Eigen::VectorXd g2;
        EXPECT_EQ(obj.value_and_gradient(x, g2), obj.value(x));
        EXPECT_EQ(g2, g);
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 18);
}

TEST(JointGradient, LambdaPartialClosedForm) {
  // one edge, one tied coordinate: d/dlambda = -beta div / l^2 + (a+1)/l - b/l^2
  const Hierarchy h = build_hierarchy({{"c", "p"}}, {"p", "c"});
  HierarchyData data(Family::multinomial, 1, 2);
  SparseDoc doc{{0}, {2.0}};
  data.set(1, Dataset::documents(1, {doc}));
  ObjectiveConfig cfg;
  cfg.beta = 1.5;
  cfg.dot_mode = DotMode::hyperprior;
  const ParamIndex idx = layout(h, Family::multinomial, 1);
  const TyingMask mask = TyingMask::for_family(h, Family::multinomial, 1);
  auto dot = DotCoefficients::constant(h, idx, mask, DotGranularity::per_coordinate, 0.8);
  HyperpriorSpec prior{2.0, {Eigen::VectorXd::Constant(1, 0.6)}};
  const TransferObjective obj(h, data, cfg, dot, prior);
  const double l = 1.7;
  Eigen::VectorXd x(3);
  x << 0.2, -0.9, std::log(l);
  const double div = 1.1 * 1.1;
  const double dl = -cfg.beta * div / (l * l) + 3.0 / l - 0.6 / (l * l);
  EXPECT_NEAR(obj.gradient(x)[2], dl * l, 1e-12);  // chain rule through log lambda
}

TEST(JointGradient, SymmetricUnderLeafSwap) {
  Rng rng(67);
  const Hierarchy h = fx::two_leaf_tree();
  HierarchyData data(Family::gaussian, 2, 3);
  const Eigen::MatrixXd rows = fx::random_rows(rng, 6, 2);
  data.set(1, Dataset::gaussian(rows));
  data.set(2, Dataset::gaussian(rows));
  ObjectiveConfig cfg;
  cfg.alpha = 0.2;
  const TransferObjective obj(h, data, cfg, {});
  ParamState s = init_state(h, data, 0.2);
  s.values.segment(0, 5).array() += 0.1;  // move the root off the leaves
  const Eigen::VectorXd g = obj.gradient(s.values);
  EXPECT_TRUE(g.segment(5, 5).isApprox(g.segment(10, 5), 1e-12));
}

TEST(JointObjective, ConvexWithFixedLambda) {
  Rng rng(71);
  // (a) multinomial, joint in all logits
  {
    const Instance in = make_instance(rng, Family::multinomial, 6, DivergenceKind::l2, DotMode::fixed, 5);
    const TransferObjective obj(in.h, in.data, in.config, in.dot);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd a = jittered_theta(in, rng) * (1.0 + uniform01(rng));
      const Eigen::VectorXd b = jittered_theta(in, rng) + Eigen::VectorXd::Random(a.size());
      const double fm = obj.value(0.5 * (a + b));
      EXPECT_LE(fm, 0.5 * (obj.value(a) + obj.value(b)) + 1e-9 * (1.0 + std::abs(fm)));
    }
  }
  // (b) Gaussian restricted to means
  {
    const Instance in = make_instance(rng, Family::gaussian, 3, DivergenceKind::l1_smoothed, DotMode::fixed, 5);
    const TransferObjective obj(in.h, in.data, in.config, in.dot);
    const Eigen::VectorXd base = jittered_theta(in, rng);
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd a = base, b = base;
      for (NodeId n = 0; n < in.h.size(); ++n) {
        const Block m = obj.index().block(n, 0);
        for (std::size_t k = 0; k < m.size; ++k) {
          a[static_cast<Eigen::Index>(m.offset + k)] += standard_normal(rng);
          b[static_cast<Eigen::Index>(m.offset + k)] += standard_normal(rng);
        }
      }
      const double fm = obj.value(0.5 * (a + b));
      EXPECT_LE(fm, 0.5 * (obj.value(a) + obj.value(b)) + 1e-9 * (1.0 + std::abs(fm)));
    }
  }
  // (c) Gaussian restricted to precisions, endpoints PD so the segment is PD
  {
    const Instance in = make_instance(rng, Family::gaussian, 3, DivergenceKind::eps_insensitive, DotMode::fixed, 4);
    const TransferObjective obj(in.h, in.data, in.config, in.dot);
    const Eigen::VectorXd base = jittered_theta(in, rng);
    auto with_precisions = [&]() {
      Eigen::VectorXd v = base;
      for (NodeId n = 0; n < in.h.size(); ++n) {
        const Block k = obj.index().block(n, 1);
        v.segment(static_cast<Eigen::Index>(k.offset), static_cast<Eigen::Index>(k.size)) =
            pack_upper(fx::random_spd(rng, 3, 0.3));
      }
      return v;
    };
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd a = with_precisions(), b = with_precisions();
      ASSERT_TRUE(obj.feasible(a) && obj.feasible(b));
      const double fm = obj.value(0.5 * (a + b));
      EXPECT_LE(fm, 0.5 * (obj.value(a) + obj.value(b)) + 1e-9 * (1.0 + std::abs(fm)));
    }
  }
}

TEST(JointObjective, InfeasiblePrecisionRejected) {
  Rng rng(73);
  const Instance in = make_instance(rng, Family::gaussian, 2, DivergenceKind::l2, DotMode::none, 3);
  const TransferObjective obj(in.h, in.data, in.config, in.dot);
  Eigen::VectorXd x = jittered_theta(in, rng);
  const Block k = obj.index().block(in.h.leaves().front(), 1);
  x[static_cast<Eigen::Index>(k.offset)] = -1.0;
  EXPECT_FALSE(obj.feasible(x));
  EXPECT_THROW(obj.value(x), NumericalError);
}

TEST(DotCoefficients, GroupGranularityAndFlatten) {
  const Hierarchy h = fx::chain_tree();
  const ParamIndex idx = layout(h, Family::gaussian, 3);
  const TyingMask mask = TyingMask::for_family(h, Family::gaussian, 3);
  const auto group = DotCoefficients::constant(h, idx, mask, DotGranularity::per_group, 2.0);
  EXPECT_EQ(group.slot_count(), 4u);  // mean + precision on two edges
  const auto coord = DotCoefficients::constant(h, idx, mask, DotGranularity::per_coordinate, 2.0);
  EXPECT_EQ(coord.slot_count(), 12u);  // 3 means + 3 diagonals, two edges
  auto copy = coord;
  Eigen::VectorXd flat = Eigen::VectorXd::LinSpaced(12, 1.0, 12.0);
  copy.assign(flat);
  EXPECT_EQ(copy.flatten(), flat);
  EXPECT_NO_THROW(coord.check_covers(mask));
  EXPECT_THROW(dot_mode_from_string("sometimes"), std::invalid_argument);
}
