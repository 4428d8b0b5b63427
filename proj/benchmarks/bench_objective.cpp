#include <benchmark/benchmark.h>

#include "hbt/estimation.hpp"
#include "hbt/synth.hpp"
#include "hbt/transfer_objective.hpp"

using namespace hbt;

namespace {

SynthResult problem(Family family, std::size_t dim, std::size_t depth, std::size_t branching) {
  SynthSpec s;
  s.family = family;
  s.dim = dim;
  s.depth = depth;
  s.branching = branching;
  s.train_count = 10;
  s.test_count = 1;
  s.perturbation = 0.3;
  s.seed = 5;
  return synthesize(s);
}

void objective_gradient(benchmark::State& state, Family family, DotMode mode) {
  const std::size_t dim = static_cast<std::size_t>(state.range(0));
  const SynthResult p = problem(family, dim, 2, 3);
  ObjectiveConfig cfg;
  cfg.alpha = 0.1;
  cfg.dot_mode = mode;
  std::optional<DotCoefficients> dot;
  if (mode != DotMode::none) dot = bootstrap_dot(p.hierarchy, p.train, {}, cfg.alpha);
  const TransferObjective obj(p.hierarchy, p.train, cfg, dot ? *dot : DotCoefficients{});
  const Eigen::VectorXd x = obj.pack(init_state(p.hierarchy, p.train, cfg.alpha).values);
  Eigen::VectorXd g;
  for (auto _ : state) benchmark::DoNotOptimize(obj.value_and_gradient(x, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}

void bootstrap(benchmark::State& state, Family family) {
  const SynthResult p = problem(family, static_cast<std::size_t>(state.range(0)), 2, 3);
  BootstrapConfig cfg;
  cfg.resamples = 50;
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_dot(p.hierarchy, p.train, cfg, 0.1));
}

}  // namespace

BENCHMARK_CAPTURE(objective_gradient, gaussian_plain, Family::gaussian, DotMode::none)
    ->Arg(5)->Arg(10)->Arg(20);
BENCHMARK_CAPTURE(objective_gradient, gaussian_hyperprior, Family::gaussian, DotMode::hyperprior)
    ->Arg(10);
BENCHMARK_CAPTURE(objective_gradient, multinomial_plain, Family::multinomial, DotMode::none)
    ->Arg(100)->Arg(500)->Arg(2000);
BENCHMARK_CAPTURE(bootstrap, gaussian, Family::gaussian)->Arg(10);
BENCHMARK_CAPTURE(bootstrap, multinomial, Family::multinomial)->Arg(500);
