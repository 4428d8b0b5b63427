#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hbt/cg.hpp"
#include "hbt/dataset.hpp"
#include "hbt/hierarchy.hpp"
#include "hbt/transfer_objective.hpp"

namespace hbt {

// ---------------------------------------------------------------------------
// Closed-form independent estimates.

/// Regularized ML estimate of one dataset as a node-local parameter vector
/// (Gaussian: mean then packed precision; multinomial: log probabilities).
Eigen::VectorXd ml_estimate(const Dataset& data, double alpha);

// ---------------------------------------------------------------------------
// Initialization.

enum class InitKind { per_node_ml, pooled_root, user };

std::string_view to_string(InitKind k);
InitKind init_kind_from_string(std::string_view s);

struct InitPolicy {
  InitKind kind = InitKind::per_node_ml;
  Eigen::VectorXd user;  // full theta, InitKind::user only
};

/// Pseudocount used to initialize multinomial logits when alpha is zero, so
/// unseen words start finite.
inline constexpr double kInitPseudocount = 1e-3;

/// per_node_ml: each leaf at its own regularized ML estimate, each internal
/// node at the estimate of its pooled descendant data. pooled_root: every node
/// at the root's pooled estimate. user: the supplied vector.
ParamState init_state(const Hierarchy& h, const HierarchyData& data, double alpha,
                      const InitPolicy& policy = {});

// ---------------------------------------------------------------------------
// Bootstrap DOT coefficients.

struct BootstrapConfig {
  std::size_t resamples = 50;
  std::uint64_t seed = 0;
  double variance_floor = 1e-6;

  void validate() const;
};

/// lambda = max(sample variance of (child estimate - parent estimate) across
/// paired resamples, floor). Internal nodes are estimated from the pooled
/// resampled data of their descendants.
DotCoefficients bootstrap_dot(const Hierarchy& h, const HierarchyData& data,
                              const BootstrapConfig& cfg, double alpha,
                              const TyingMask& mask = {},
                              DotGranularity granularity = DotGranularity::per_coordinate);

// ---------------------------------------------------------------------------
// MAP fitting.

struct FitResult {
  ParamState state;
  DotCoefficients dot;
  double objective_value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> trace;
  double grad_norm = 0.0;
};

/// Minimizes the joint objective. Gaussian problems alternate between a mean
/// block and a precision block unless opt.block_mode is joint; multinomial
/// problems run one joint CG. In hyperprior mode the log-lambdas join every
/// block. `dot` is required for fixed and hyperprior modes; `prior` defaults
/// to an inverse-Gamma with shape 2 and mean `dot`.
FitResult fit_map(const Hierarchy& h, const HierarchyData& data, const ObjectiveConfig& config,
                  const std::optional<DotCoefficients>& dot,
                  const std::optional<HyperpriorSpec>& prior, const OptimizerConfig& opt,
                  const InitPolicy& init = {});

}  // namespace hbt
