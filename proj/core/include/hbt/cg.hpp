#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hbt {

enum class BlockMode { joint, alternating_gaussian };

std::string_view to_string(BlockMode m);
BlockMode block_mode_from_string(std::string_view s);

struct OptimizerConfig {
  double grad_tol = 1e-6;
  std::size_t max_iters = 2000;
  std::size_t restart_period = 0;  // 0: problem dimension
  double initial_step = 1.0;
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  BlockMode block_mode = BlockMode::alternating_gaussian;
  std::size_t outer_block_iters = 25;
  /// Group labels held at their initial values ("mean", "precision", ...).
  std::vector<std::string> frozen_groups;
  /// Hyperprior mode only: number of starts over perturbed initial lambdas.
  std::size_t starts = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class CgStatus { converged, max_iterations, line_search_failed };

std::string_view to_string(CgStatus s);

struct CgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::vector<double> trace;  // objective at x0 and after every accepted step
  std::size_t iterations = 0;
  CgStatus status = CgStatus::max_iterations;
  double grad_norm = 0.0;  // gradient measure at x (|g|_inf by default)

  bool converged() const { return status == CgStatus::converged; }
};

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using FeasibleFn = std::function<bool(const Eigen::VectorXd&)>;
/// Gradient size used by the convergence tests; defaults to |g|_inf. Lets a
/// caller that minimizes over transformed variables judge convergence in the
/// original coordinates.
using GradMeasureFn = std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& g)>;

/// Polak-Ribiere (PR+) nonlinear conjugate gradient with Armijo backtracking.
/// Steps that leave the feasible set, or give a non-finite value, count as
/// insufficient decrease. An accepted Armijo step is refined once by the
/// minimizer of the quadratic through f(0), f'(0) and f(t) when that point
/// is feasible and lower. Converged means |g|_inf <= grad_tol, or, when no
/// step along -g decreases f measurably, |g|_inf <= grad_tol * max(1, |f|).
/// Throws NumericalError if x0 is infeasible.
CgResult cg_minimize(const ObjectiveFn& f, const GradientFn& g, Eigen::VectorXd x0,
                     const OptimizerConfig& cfg, const FeasibleFn& feasible = {},
                     const GradMeasureFn& measure = {});

}  // namespace hbt
