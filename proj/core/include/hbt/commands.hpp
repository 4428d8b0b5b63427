#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hbt/baselines.hpp"
#include "hbt/cg.hpp"
#include "hbt/estimation.hpp"
#include "hbt/evaluation.hpp"
#include "hbt/io.hpp"
#include "hbt/synth.hpp"
#include "hbt/transfer_objective.hpp"

namespace hbt {

// ---------------------------------------------------------------------------
// Fitting and evaluation shared by the CLI subcommands and the sweep.

/// map: joint MAP fit (dot mode from objective.dot_mode).
/// cvreg, cvconst, likelihood, shrinkage: the baselines.
enum class FitMethod { map, cvreg, cvconst, likelihood, shrinkage };

std::string_view to_string(FitMethod m);
FitMethod fit_method_from_string(std::string_view s);

struct FitOptions {
  FitMethod method = FitMethod::map;
  ObjectiveConfig objective;
  BootstrapConfig bootstrap;
  OptimizerConfig optimizer;
  InitPolicy init;
  std::optional<DotCoefficients> dot;  // fixed / hyperprior: skips the bootstrap
  CvGrid alpha_grid{{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0}, 5, 0};
  CvGrid beta_grid{log_grid(1e-6, 1.0, 7), 5, 0};
  CvGrid weight_grid{{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, 5, 0};
  double shrinkage_alpha = 1.0;
  /// When set, alpha for map / cvconst is the median CV Reg choice.
  bool alpha_from_cv = false;
};

ModelFile fit_model(const Hierarchy& h, const HierarchyData& train, const FitOptions& options);

struct EvalOptions {
  std::string label;           // method column; defaults to the model's method
  bool uniform_priors = false;  // classification priors
};

/// One row per leaf with test data; accuracy for multinomial models.
EvalReport evaluate_model(const ModelFile& model, const HierarchyData& test,
                          const EvalOptions& options = {});

/// Mean over leaf rows of bits per instance.
double mean_bits(const EvalReport& report);

/// Parameters of every leaf, in leaf order. Throws if a leaf has none.
std::vector<MultinomialParams> leaf_multinomials(const ModelFile& model);
std::vector<double> leaf_log_priors(const ModelFile& model, bool uniform);

/// Drops words absent from both sets and renumbers the rest; returns the new
/// vocabulary size.
std::size_t compact_vocabulary(HierarchyData& a, HierarchyData& b);

// ---------------------------------------------------------------------------
// Sweeps over training size, fold and method on synthetic problems.

struct SweepOptions {
  SynthSpec synth;  // train_count is raised to max(sizes)
  std::vector<std::string> methods{"cvreg", "hyperprior"};
  std::vector<std::size_t> sizes{3, 5, 10, 15};
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string baseline = "cvreg";
  FitOptions base;  // shared settings; method and dot mode are set per cell
  bool hb_alpha_cv = true;  // hierarchical alpha = median CV Reg choice
};

struct SweepCell {
  std::string method;
  std::size_t n = 0;
  std::size_t fold = 0;
  double metric = 0.0;  // mean leaf bits/instance (Gaussian) or accuracy
  bool failed = false;
  std::string error;
};

struct SweepResult {
  Family family = Family::gaussian;
  std::vector<SweepCell> cells;  // method-major, then N, then fold
  std::string baseline;

  const SweepCell& cell(const std::string& method, std::size_t n, std::size_t fold) const;
  /// method, N, mean, mean delta vs baseline, folds beating the baseline.
  std::string table() const;
  /// "method N mean_delta" lines, one block per method.
  std::string plot_data() const;
};

/// Recognized sweep method names.
const std::vector<std::string>& sweep_methods();

/// The synthetic problem of one fold.
SynthResult sweep_fold_data(const SweepOptions& options, std::size_t fold);
/// Fit options of one cell; seeds derive from (master seed, N, fold, method).
FitOptions sweep_cell_options(const SweepOptions& options, const std::string& method,
                              std::size_t n, std::size_t fold);
/// Fits and evaluates one cell on the given fold data.
SweepCell run_sweep_cell(const SweepOptions& options, const SynthResult& fold_data,
                         const std::string& method, std::size_t n, std::size_t fold);

SweepResult run_sweep(const SweepOptions& options);

/// Ground truth of a synthetic problem as a model file.
ModelFile truth_model(const SynthResult& synth, const SynthSpec& spec);

}  // namespace hbt
