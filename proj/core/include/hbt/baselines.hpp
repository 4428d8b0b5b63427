#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "hbt/dataset.hpp"
#include "hbt/estimation.hpp"
#include "hbt/evaluation.hpp"
#include "hbt/hierarchy.hpp"

namespace hbt {

struct CvGrid {
  std::vector<double> values;
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// log-spaced grid lo..hi (inclusive) with `count` points.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

/// Regularized ML parameters of one dataset (ridge alpha / pseudocount alpha).
NodeParams fit_regularized(const Dataset& data, double alpha);

// ---------------------------------------------------------------------------
// CV Reg: independent per-leaf regularization chosen by k-fold CV.

struct LeafEstimate {
  NodeId node = 0;
  double alpha = 0.0;
  NodeParams params;
  double cv_score = 0.0;  // total held-out log-likelihood (nats) at alpha
};

/// Per leaf: alpha maximizing held-out log-likelihood (leave-one-out when the
/// leaf has fewer instances than folds), then a refit on all its data. Ties
/// keep the earlier grid value.
std::vector<LeafEstimate> fit_cvreg(const Hierarchy& h, const HierarchyData& data,
                                    const CvGrid& grid);

// ---------------------------------------------------------------------------
// CV Const: joint fit without per-parameter DOT coefficients, beta chosen by CV.

struct CvConstResult {
  double beta = 0.0;
  FitResult fit;
};

CvConstResult fit_cvconst(const Hierarchy& h, const HierarchyData& data,
                          const ObjectiveConfig& base, const CvGrid& betas,
                          const OptimizerConfig& opt);

// ---------------------------------------------------------------------------
// Shrinkage: top-down linear interpolation toward the parent.

struct ShrinkageResult {
  std::vector<double> level_weights;          // index = depth; [0] unused
  std::vector<Eigen::VectorXd> probabilities;  // per node
  std::vector<MultinomialParams> params;       // per node, log probabilities
};

/// Root = pooled smoothed frequencies; node = w[depth] * own smoothed
/// frequencies (pooled descendants) + (1 - w[depth]) * parent's result.
ShrinkageResult shrinkage_estimate(const Hierarchy& h, const HierarchyData& data,
                                   const std::vector<double>& level_weights,
                                   double alpha = 1.0);

/// Per-level weights chosen from `grid` by k-fold CV of held-out leaf
/// log-likelihood. Throws std::invalid_argument for Gaussian data.
ShrinkageResult fit_shrinkage(const Hierarchy& h, const HierarchyData& data, const CvGrid& grid,
                              double alpha = 1.0);

// ---------------------------------------------------------------------------
// Likelihood: unregularized ML per leaf.

/// Multinomial zero counts become -inf logits. Gaussian leaves with
/// M <= d raise NumericalError.
std::vector<std::optional<NodeParams>> fit_likelihood(const Hierarchy& h,
                                                      const HierarchyData& data);

}  // namespace hbt
