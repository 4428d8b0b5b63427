#include "hbt/cg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hbt/likelihoods.hpp"

namespace hbt {

std::string_view to_string(BlockMode m) {
  return m == BlockMode::joint ? "joint" : "alternating";
}

BlockMode block_mode_from_string(std::string_view s) {
  if (s == "joint") return BlockMode::joint;
  if (s == "alternating" || s == "alternating-gaussian") return BlockMode::alternating_gaussian;
  throw std::invalid_argument("unknown block mode '" + std::string(s) + "'");
}

std::string_view to_string(CgStatus s) {
  switch (s) {
    case CgStatus::converged: return "converged";
    case CgStatus::max_iterations: return "max_iterations";
    case CgStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

void OptimizerConfig::validate() const {
  if (!(grad_tol > 0.0)) throw std::invalid_argument("optimizer: grad_tol must be > 0");
  if (!(initial_step > 0.0)) throw std::invalid_argument("optimizer: initial_step must be > 0");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw std::invalid_argument("optimizer: backtrack factor must be in (0,1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
    throw std::invalid_argument("optimizer: sufficient-decrease constant must be in (0,1)");
  if (starts == 0) throw std::invalid_argument("optimizer: starts must be >= 1");
}

namespace {

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  double value = 0.0;
  Eigen::VectorXd x;
};

LineSearchResult armijo_search(const ObjectiveFn& f, const GradientFn& g,
                               const FeasibleFn& feasible, const Eigen::VectorXd& x, double fx,
                               const Eigen::VectorXd& dir, double slope, double step,
                               const OptimizerConfig& cfg) {
  const double dir_norm = dir.lpNorm<Eigen::Infinity>();
  const double x_scale = 1.0 + x.lpNorm<Eigen::Infinity>();
  const double eps = std::numeric_limits<double>::epsilon();
  auto try_point = [&](double t, Eigen::VectorXd& xt, double& ft) {
    xt = x + t * dir;
    if (feasible && !feasible(xt)) return false;
    ft = f(xt);
    return std::isfinite(ft);
  };

  LineSearchResult out;
  double t = step;
  while (t * dir_norm > eps * x_scale) {
    Eigen::VectorXd xt;
    double ft = 0.0;
    if (try_point(t, xt, ft)) {
      if (ft <= fx + cfg.sufficient_decrease * t * slope) {
        out = {true, t, ft, std::move(xt)};
        break;
      }
      // Near a minimum the required decrease drops below the rounding noise
      // of f. Then the slope at the trial point decides (approximate Wolfe),
      // but f must still not increase.
      if (ft <= fx && fx - ft <= 1e-11 * (1.0 + std::abs(fx)) &&
          g(xt).dot(dir) <= (1.0 - 2.0 * cfg.sufficient_decrease) * -slope) {
        out = {true, t, ft, std::move(xt)};
        break;
      }
    }
    t *= cfg.backtrack;
  }
  if (!out.accepted) return out;

  // One interpolation refinement along the same direction.
  const double curvature = out.value - fx - slope * out.step;
  if (curvature > 0.0) {
    const double t_star = -slope * out.step * out.step / (2.0 * curvature);
    if (std::isfinite(t_star) && t_star > 0.0 && t_star <= 8.0 * out.step &&
        std::abs(t_star - out.step) > 1e-3 * out.step) {
      Eigen::VectorXd xt;
      double ft = 0.0;
      if (try_point(t_star, xt, ft) && ft < out.value &&
          ft <= fx + cfg.sufficient_decrease * t_star * slope)
        out = {true, t_star, ft, std::move(xt)};
    }
  }
  return out;
}

}  // namespace

CgResult cg_minimize(const ObjectiveFn& f, const GradientFn& g, Eigen::VectorXd x0,
                     const OptimizerConfig& cfg, const FeasibleFn& feasible,
                     const GradMeasureFn& measure) {
  cfg.validate();
  auto grad_size = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& gx) {
    return measure ? measure(x, gx) : gx.lpNorm<Eigen::Infinity>();
  };
  if (feasible && !feasible(x0)) throw NumericalError("cg_minimize: infeasible starting point");

  CgResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  if (!std::isfinite(res.value)) throw NumericalError("cg_minimize: non-finite objective at start");
  res.trace.push_back(res.value);

  Eigen::VectorXd grad = g(res.x);
  res.grad_norm = grad_size(res.x, grad);
  if (res.grad_norm <= cfg.grad_tol) {
    res.status = CgStatus::converged;
    return res;
  }

  const std::size_t n = static_cast<std::size_t>(res.x.size());
  const std::size_t restart = cfg.restart_period > 0 ? cfg.restart_period : n;

  Eigen::VectorXd dir = -grad;
  double slope = dir.dot(grad);
  double step = cfg.initial_step / std::max(1.0, dir.lpNorm<Eigen::Infinity>());
  std::size_t since_restart = 0;

  while (res.iterations < cfg.max_iters) {
    LineSearchResult ls =
        armijo_search(f, g, feasible, res.x, res.value, dir, slope, step, cfg);
    if (!ls.accepted) {
      if (since_restart == 0) {
        // No measurable decrease even along -g. That is convergence when the
        // gradient is small relative to the objective's own scale.
        res.status = res.grad_norm <= cfg.grad_tol * std::max(1.0, std::abs(res.value))
                         ? CgStatus::converged
                         : CgStatus::line_search_failed;
        return res;
      }
      // Retry from steepest descent before giving up.
      dir = -grad;
      slope = dir.dot(grad);
      step = cfg.initial_step / std::max(1.0, dir.lpNorm<Eigen::Infinity>());
      since_restart = 0;
      continue;
    }

    ++res.iterations;
    ++since_restart;
    res.x = std::move(ls.x);
    res.value = ls.value;
    res.trace.push_back(res.value);

    Eigen::VectorXd grad_new = g(res.x);
    res.grad_norm = grad_size(res.x, grad_new);
    if (res.grad_norm <= cfg.grad_tol) {
      res.status = CgStatus::converged;
      return res;
    }

    double beta_pr = 0.0;
    if (since_restart < restart) {
      const double denom = grad.squaredNorm();
      beta_pr = denom > 0.0 ? std::max(0.0, grad_new.dot(grad_new - grad) / denom) : 0.0;
    } else {
      since_restart = 0;
    }
    const double prev_slope = slope;
    dir = -grad_new + beta_pr * dir;
    slope = dir.dot(grad_new);
    if (!(slope < 0.0)) {
      dir = -grad_new;
      slope = dir.dot(grad_new);
      since_restart = 0;
    }
    // Carry the previous first-order change into the next trial step.
    step = std::max(ls.step * prev_slope / slope, 0.0);
    if (!(step > 0.0) || !std::isfinite(step))
      step = cfg.initial_step / std::max(1.0, dir.lpNorm<Eigen::Infinity>());
    step = std::min(step * 2.0, 1e10);
    grad = std::move(grad_new);
  }
  res.status = CgStatus::max_iterations;
  return res;
}

}  // namespace hbt
