#include <cmath>
#include <cstring>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "hbt/estimation.hpp"
#include "hbt/evaluation.hpp"
#include "test_support.hpp"

using namespace hbt;

namespace {

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1]) return false;
  return true;
}

HierarchyData one_d_two_leaf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  HierarchyData data(Family::gaussian, 1, 3);
  data.set(1, Dataset::gaussian(a));
  data.set(2, Dataset::gaussian(b));
  return data;
}

double max_tied_gap(const Hierarchy& h, const ParamState& s, const TyingMask& mask) {
  double gap = 0.0;
  for (auto [c, p] : h.edges())
    for (std::size_t k = 0; k < s.index.node_dim(); ++k)
      if (mask.tied(c, k))
        gap = std::max(gap, std::abs(s.node_block(c)[static_cast<Eigen::Index>(k)] -
                                     s.node_block(p)[static_cast<Eigen::Index>(k)]));
  return gap;
}

}  // namespace

TEST(Cg, QuadraticBowl) {
  Rng rng(1);
  const Eigen::VectorXd x0 = fx::random_rows(rng, 1, 10).row(0).transpose();
  const CgResult r = cg_minimize([](const Eigen::VectorXd& x) { return x.squaredNorm(); },
                                 [](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * x); },
                                 x0, {});
  EXPECT_TRUE(r.converged());
  EXPECT_LT(r.x.lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_TRUE(non_increasing(r.trace));
}

TEST(Cg, StationaryStartTakesNoSteps) {
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
  const CgResult r = cg_minimize([](const Eigen::VectorXd& x) { return x.squaredNorm(); },
                                 [](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * x); },
                                 x0, {});
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.x, x0);
  EXPECT_TRUE(r.converged());
}

TEST(Cg, SpdQuadraticMatchesLinearSolve) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd a = fx::random_spd(rng, 20, 0.5);
    const Eigen::VectorXd b = fx::random_rows(rng, 1, 20).row(0).transpose();
    const CgResult r = cg_minimize(
        [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(a * x) - b.dot(x); },
        [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x - b); },
        Eigen::VectorXd::Zero(20), {});
    const Eigen::VectorXd solution = a.llt().solve(b);
    EXPECT_TRUE(r.converged());
    EXPECT_LT((r.x - solution).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_TRUE(non_increasing(r.trace));
  }
}

TEST(Cg, FeasibilityRespected) {
  // minimize (x - 2)^2 on x < 1: iterates approach the boundary, never cross it
  const CgResult r = cg_minimize(
      [](const Eigen::VectorXd& x) { return (x[0] - 2.0) * (x[0] - 2.0); },
      [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, 2.0 * (x[0] - 2.0)); },
      Eigen::VectorXd::Zero(1), {}, [](const Eigen::VectorXd& x) { return x[0] < 1.0; });
  EXPECT_LT(r.x[0], 1.0);
  EXPECT_GT(r.x[0], 0.99);
  EXPECT_FALSE(r.converged());
  EXPECT_THROW(cg_minimize([](const Eigen::VectorXd&) { return 0.0; },
                           [](const Eigen::VectorXd& x) { return x; }, Eigen::VectorXd::Ones(1),
                           {}, [](const Eigen::VectorXd&) { return false; }),
               NumericalError);
}

TEST(Cg, RejectsBadConfig) {
  OptimizerConfig cfg;
  cfg.backtrack = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.grad_tol = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(InitState, SpecExamples) {
  // single node that is both root and leaf
  const Hierarchy solo = build_hierarchy({}, {"only"});
  HierarchyData docs(Family::multinomial, 2, 1);
  docs.set(0, Dataset::documents(2, {SparseDoc{{0, 1}, {3.0, 1.0}}}));
  const ParamState s = init_state(solo, docs, 1.0);
  EXPECT_NEAR(s.values[0], std::log(4.0 / 6.0), 1e-12);
  EXPECT_NEAR(s.values[1], std::log(2.0 / 6.0), 1e-12);

  // leaf and root of a chain with data only at the leaf start identical
  const Hierarchy chain = build_hierarchy({{"leaf", "root"}}, {"root", "leaf"});
  HierarchyData g(Family::gaussian, 2, 2);
  Rng rng(3);
  const Eigen::MatrixXd rows = fx::random_rows(rng, 6, 2);
  g.set(1, Dataset::gaussian(rows));
  const ParamState sc = init_state(chain, g, 0.2);
  EXPECT_EQ(sc.node_block(0), sc.node_block(1));

  // precision = inv(empirical covariance + alpha I)
  const Eigen::RowVectorXd mu = rows.colwise().mean();
  const Eigen::MatrixXd c = rows.rowwise() - mu;
  Eigen::MatrixXd cov = c.transpose() * c / 6.0;
  cov.diagonal().array() += 0.2;
  EXPECT_TRUE(gaussian_params(sc, 1).precision.isApprox(cov.inverse(), 1e-10));
  EXPECT_TRUE(gaussian_params(sc, 1).mean.isApprox(mu.transpose(), 1e-12));
}

TEST(InitState, PooledRootAndUser) {
  Rng rng(4);
  const Hierarchy h = fx::two_leaf_tree();
  const HierarchyData data = fx::random_data(h, Family::gaussian, 2, rng);
  const ParamState pooled = init_state(h, data, 0.1, {InitKind::pooled_root, {}});
  EXPECT_EQ(pooled.node_block(1), pooled.node_block(0));
  EXPECT_EQ(pooled.node_block(2), pooled.node_block(0));
  const ParamState user = init_state(h, data, 0.1, {InitKind::user, pooled.values});
  EXPECT_EQ(user.values, pooled.values);
  EXPECT_THROW(init_state(h, data, 0.1, {InitKind::user, Eigen::VectorXd::Zero(3)}),
               std::invalid_argument);
}

TEST(Bootstrap, ConstantDataHitsFloor) {
  const Hierarchy h = fx::two_leaf_tree();
  HierarchyData g(Family::gaussian, 2, 3);
  Eigen::MatrixXd rows(5, 2);
  rows.rowwise() = Eigen::RowVector2d(1.0, 3.0);
  g.set(1, Dataset::gaussian(rows));
  g.set(2, Dataset::gaussian(rows));
  BootstrapConfig cfg;
  cfg.variance_floor = 1e-6;
  const DotCoefficients dot = bootstrap_dot(h, g, cfg, 0.1);
  for (const auto& e : dot.edges())
    for (Eigen::Index i = 0; i < e.lambda.size(); ++i) EXPECT_EQ(e.lambda[i], 1e-6);

  HierarchyData m(Family::multinomial, 3, 3);
  const SparseDoc doc{{0, 2}, {2.0, 1.0}};
  m.set(1, Dataset::documents(3, {doc, doc, doc}));
  m.set(2, Dataset::documents(3, {doc, doc}));
  const DotCoefficients mdot = bootstrap_dot(h, m, cfg, 1.0);
  for (const auto& e : mdot.edges())
    for (Eigen::Index i = 0; i < e.lambda.size(); ++i) EXPECT_EQ(e.lambda[i], 1e-6);
}

TEST(Bootstrap, Deterministic) {
  Rng rng(5);
  const Hierarchy h = fx::two_leaf_tree();
  const HierarchyData data = fx::random_data(h, Family::gaussian, 3, rng, 10);
  BootstrapConfig cfg;
  cfg.seed = 99;
  const Eigen::VectorXd a = bootstrap_dot(h, data, cfg, 0.1).flatten();
  const Eigen::VectorXd b = bootstrap_dot(h, data, cfg, 0.1).flatten();
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())), 0);
  cfg.seed = 100;
  EXPECT_NE(bootstrap_dot(h, data, cfg, 0.1).flatten(), a);
}

TEST(Bootstrap, MatchesResamplingVariance) {
  Rng rng(6);
  const Eigen::VectorXd a = fx::random_rows(rng, 30, 1).col(0);
  const Eigen::VectorXd b = fx::random_rows(rng, 20, 1, 1.0).col(0);
  const Hierarchy h = fx::two_leaf_tree();
  BootstrapConfig cfg;
  cfg.resamples = 200;
  cfg.seed = 7;
  const DotCoefficients dot = bootstrap_dot(h, one_d_two_leaf(a, b), cfg, 0.1);
  // delta_a = mean(a*) - pooled mean = nb/N (mean(a*) - mean(b*))
  auto biased_var = [](const Eigen::VectorXd& v) {
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size());
  };
  const double na = 30, nb = 20, n = 50;
  const double var_diff = biased_var(a) / na + biased_var(b) / nb;
  const double expect_a = (nb / n) * (nb / n) * var_diff;
  const double expect_b = (na / n) * (na / n) * var_diff;
  const double got_a = dot.edge_for(1).lambda[dot.edge_for(1).slot[0]];
  const double got_b = dot.edge_for(2).lambda[dot.edge_for(2).slot[0]];
  EXPECT_NEAR(got_a / expect_a, 1.0, 0.25);
  EXPECT_NEAR(got_b / expect_b, 1.0, 0.25);
}

TEST(Bootstrap, RejectsBadConfigAndEmptyLeaf) {
  BootstrapConfig cfg;
  cfg.resamples = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.variance_floor = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  const Hierarchy h = fx::two_leaf_tree();
  HierarchyData data(Family::gaussian, 1, 3);
  data.set(1, Dataset::gaussian(Eigen::MatrixXd::Ones(3, 1)));
  EXPECT_THROW(bootstrap_dot(h, data, {}, 0.1), std::invalid_argument);
}

TEST(FitMap, BetaZeroMatchesIndependentMl) {
  Rng rng(8);
  for (Family family : {Family::gaussian, Family::multinomial}) {
    const Hierarchy h = fx::random_tree(5, rng);
    const std::size_t dim = family == Family::gaussian ? 3 : 6;
    const HierarchyData data = fx::random_data(h, family, dim, rng, 10);
    ObjectiveConfig cfg;
    cfg.beta = 0.0;
    cfg.alpha = 0.3;
    // start away from the answer so the optimizer has work to do
    InitPolicy init{InitKind::pooled_root, {}};
    const FitResult r = fit_map(h, data, cfg, std::nullopt, std::nullopt, {}, init);
    EXPECT_TRUE(r.converged);
    for (NodeId leaf : h.leaves()) {
      Eigen::VectorXd got = r.state.node_block(leaf);
      Eigen::VectorXd want = ml_estimate(*data.find(leaf), cfg.alpha);
      if (family == Family::multinomial) got = log_normalize(got);
      EXPECT_LT((got - want).lpNorm<Eigen::Infinity>(), 1e-6) << to_string(family);
    }
  }
}

TEST(FitMap, TinyLambdaForcesAgreement) {
  Rng rng(9);
  for (Family family : {Family::gaussian, Family::multinomial}) {
    const Hierarchy h = fx::two_leaf_tree();
    const std::size_t dim = family == Family::gaussian ? 2 : 4;
    const HierarchyData data = fx::random_data(h, family, dim, rng, 10);
    ObjectiveConfig cfg;
    cfg.alpha = 0.3;
    cfg.dot_mode = DotMode::fixed;
    const TyingMask mask = TyingMask::for_family(h, family, dim);
    const auto dot = DotCoefficients::constant(h, layout(h, family, dim), mask,
                                               DotGranularity::per_coordinate, 1e-8);
    const FitResult r = fit_map(h, data, cfg, dot, std::nullopt, {});
    EXPECT_LE(max_tied_gap(h, r.state, mask), 1e-3) << to_string(family);
    EXPECT_TRUE(non_increasing(r.trace));
  }
}

TEST(FitMap, MeansOnlyQuadraticOracle) {
  const Eigen::VectorXd a = (Eigen::VectorXd(3) << 0.0, 1.0, 2.5).finished();
  const Eigen::VectorXd b = (Eigen::VectorXd(2) << 4.0, 5.0).finished();
  const Hierarchy h = fx::two_leaf_tree();
  const HierarchyData data = one_d_two_leaf(a, b);
  ObjectiveConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 1.3;
  OptimizerConfig opt;
  opt.frozen_groups = {"precision"};
  const FitResult r = fit_map(h, data, cfg, std::nullopt, std::nullopt, opt);
  ASSERT_TRUE(r.converged);

  const ParamState init = init_state(h, data, cfg.alpha);
  const double ka = gaussian_params(init, 1).precision(0, 0);
  const double kb = gaussian_params(init, 2).precision(0, 0);
  // stationarity in (mu_root, mu_a, mu_b), lambda = 1:
  //   k_c (S_c - m_c mu_c) = 2 beta (mu_c - mu_root), sum_c (mu_c - mu_root) = 0
  const double w = 2.0 * cfg.beta;
  Eigen::Matrix3d m;
  m << -2.0 * w, w, w,
       -w, ka * 3.0 + w, 0.0,
       -w, 0.0, kb * 2.0 + w;
  const Eigen::Vector3d rhs(0.0, ka * a.sum(), kb * b.sum());
  const Eigen::Vector3d mu = m.lu().solve(rhs);
  for (NodeId n = 0; n < 3; ++n) {
    EXPECT_NEAR(gaussian_params(r.state, n).mean[0], mu[static_cast<Eigen::Index>(n)], 1e-6);
    EXPECT_EQ(gaussian_params(r.state, n).precision, gaussian_params(init, n).precision);
  }
}

TEST(FitMap, DeterministicAndMonotone) {
  Rng rng(10);
  const Hierarchy h = fx::chain_tree();
  const HierarchyData data = fx::random_data(h, Family::gaussian, 3, rng, 8);
  ObjectiveConfig cfg;
  cfg.alpha = 0.2;
  cfg.dot_mode = DotMode::hyperprior;
  BootstrapConfig bc;
  bc.seed = 4;
  const DotCoefficients dot = bootstrap_dot(h, data, bc, cfg.alpha);
  const FitResult r1 = fit_map(h, data, cfg, dot, std::nullopt, {});
  const FitResult r2 = fit_map(h, data, cfg, dot, std::nullopt, {});
  EXPECT_EQ(r1.state.values, r2.state.values);
  EXPECT_EQ(r1.dot.flatten(), r2.dot.flatten());
  EXPECT_EQ(r1.objective_value, r2.objective_value);
  EXPECT_TRUE(non_increasing(r1.trace));
  EXPECT_TRUE(r1.converged);
  // every node precision stays Cholesky factorizable
  for (NodeId n = 0; n < h.size(); ++n)
    EXPECT_TRUE(is_positive_definite(gaussian_params(r1.state, n).precision));
  // optimized lambdas differ from the bootstrap start and are positive
  EXPECT_NE(r1.dot.flatten(), dot.flatten());
  EXPECT_GT(r1.dot.flatten().minCoeff(), 0.0);
}

TEST(FitMap, MultinomialObjectiveIndependentOfInit) {
  Rng rng(11);
  const Hierarchy h = fx::random_tree(6, rng);
  const HierarchyData data = fx::random_data(h, Family::multinomial, 8, rng, 5);
  ObjectiveConfig cfg;
  cfg.alpha = 0.5;
  cfg.dot_mode = DotMode::fixed;
  const TyingMask mask = TyingMask::for_family(h, Family::multinomial, 8);
  const auto dot = DotCoefficients::constant(h, layout(h, Family::multinomial, 8), mask,
                                             DotGranularity::per_coordinate, 0.5);
  OptimizerConfig opt;
  opt.grad_tol = 1e-8;
  const FitResult a = fit_map(h, data, cfg, dot, std::nullopt, opt);
  const FitResult b = fit_map(h, data, cfg, dot, std::nullopt, opt, {InitKind::pooled_root, {}});
  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(a.state.values.size());
  const FitResult c = fit_map(h, data, cfg, dot, std::nullopt, opt, {InitKind::user, zeros});
  EXPECT_NEAR(a.objective_value, b.objective_value, 1e-6);
  EXPECT_NEAR(a.objective_value, c.objective_value, 1e-6);
}

TEST(FitMap, EqualLambdaIsRescaledBeta) {
  Rng rng(12);
  const Hierarchy h = fx::two_leaf_tree();
  const HierarchyData data = fx::random_data(h, Family::multinomial, 5, rng, 6);
  const TyingMask mask = TyingMask::for_family(h, Family::multinomial, 5);
  const auto dot = DotCoefficients::constant(h, layout(h, Family::multinomial, 5), mask,
                                             DotGranularity::per_coordinate, 4.0);
  ObjectiveConfig fixed;
  fixed.alpha = 0.5;
  fixed.dot_mode = DotMode::fixed;
  ObjectiveConfig plain;
  plain.alpha = 0.5;
  plain.beta = 0.25;
  const TransferObjective f1(h, data, fixed, dot);
  const TransferObjective f2(h, data, plain, {});
  const ParamState s = init_state(h, data, 0.5);
  Eigen::VectorXd x = s.values;
  x.segment(0, 5).array() += 0.3;
  EXPECT_NEAR(f1.value(x), f2.value(x), 1e-12 * std::abs(f1.value(x)));
}

TEST(FitMap, ModeMismatchRejected) {
  Rng rng(13);
  const Hierarchy h = fx::two_leaf_tree();
  const HierarchyData data = fx::random_data(h, Family::gaussian, 2, rng);
  ObjectiveConfig cfg;
  cfg.alpha = 0.1;
  cfg.dot_mode = DotMode::fixed;
  EXPECT_THROW(fit_map(h, data, cfg, std::nullopt, std::nullopt, {}), std::invalid_argument);
}
