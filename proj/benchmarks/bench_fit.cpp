#include <benchmark/benchmark.h>

#include "hbt/commands.hpp"
#include "hbt/estimation.hpp"
#include "hbt/synth.hpp"

using namespace hbt;

namespace {

void fit(benchmark::State& state, Family family, DotMode mode,
         BlockMode block = BlockMode::alternating_gaussian) {
  SynthSpec s;
  s.family = family;
  s.dim = family == Family::gaussian ? 10 : 500;
  s.depth = family == Family::gaussian ? 1 : 2;
  s.branching = family == Family::gaussian ? 2 : 3;
  s.train_count = static_cast<std::size_t>(state.range(0));
  s.test_count = 1;
  s.perturbation = family == Family::gaussian ? 0.1 : 0.5;
  s.seed = 9;
  const SynthResult p = synthesize(s);
  ObjectiveConfig cfg;
  cfg.alpha = 0.1;
  cfg.dot_mode = mode;
  std::optional<DotCoefficients> dot;
  if (mode != DotMode::none) dot = bootstrap_dot(p.hierarchy, p.train, {}, cfg.alpha);
  OptimizerConfig opt;
  opt.block_mode = block;
  for (auto _ : state) {
    const FitResult r = fit_map(p.hierarchy, p.train, cfg, dot, std::nullopt, opt);
    benchmark::DoNotOptimize(r.objective_value);
    state.counters["iterations"] = static_cast<double>(r.iterations);
  }
}

void sweep_cell(benchmark::State& state) {
  SweepOptions o;
  o.sizes = {5};
  const SynthResult data = sweep_fold_data(o, 0);
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep_cell(o, data, "hyperprior", 5, 0));
}

}  // namespace

BENCHMARK_CAPTURE(fit, gaussian_none, Family::gaussian, DotMode::none)->Arg(5)->Arg(20);
BENCHMARK_CAPTURE(fit, gaussian_fixed, Family::gaussian, DotMode::fixed)->Arg(5)->Arg(20);
BENCHMARK_CAPTURE(fit, gaussian_hyperprior, Family::gaussian, DotMode::hyperprior)->Arg(5)->Arg(20);
BENCHMARK_CAPTURE(fit, gaussian_fixed_joint, Family::gaussian, DotMode::fixed, BlockMode::joint)
    ->Arg(5)->Arg(20);
BENCHMARK_CAPTURE(fit, multinomial_none, Family::multinomial, DotMode::none)->Arg(10);
BENCHMARK_CAPTURE(fit, multinomial_fixed, Family::multinomial, DotMode::fixed)->Arg(10);
BENCHMARK(sweep_cell)->Unit(benchmark::kMillisecond);
