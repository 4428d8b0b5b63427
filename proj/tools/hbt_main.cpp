// hbt: fit, evaluate and compare transfer-hierarchy models.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hbt/commands.hpp"
#include "hbt/io.hpp"
#include "hbt/tokenize.hpp"

namespace fs = std::filesystem;
using namespace hbt;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2 };

struct Globals {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

Family parse_family(const std::string& s) { return family_from_string(s); }

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

HierarchyData load_data(const std::string& path, const Hierarchy& h, Family family,
                        std::optional<std::size_t> dim) {
  return parse_data(read_text_file(path), h, family, path, dim);
}

// ---------------------------------------------------------------------------
// Options shared by fit and sweep.

struct ModelFlags {
  std::string method = "map";
  double beta = 1.0;
  double alpha = 0.1;
  bool alpha_cv = false;
  std::string divergence = "l2";
  double epsilon = 0.0;
  double smoothing = 1e-3;
  std::string dot = "hyperprior";
  std::string granularity = "coordinate";
  std::string dot_file;
  std::size_t resamples = 50;
  double variance_floor = 1e-6;
  std::string init = "ml";
  std::size_t max_iters = 2000;
  double grad_tol = 1e-6;
  std::string block_mode = "alternating";
  std::size_t starts = 1;
  std::vector<double> alpha_grid{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> beta_grid = log_grid(1e-6, 1.0, 7);
  std::vector<double> weight_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t cv_folds = 5;
  bool uniform_priors = false;

  void add(CLI::App* app, bool with_method) {
    if (with_method)
      app->add_option("--method", method, "map | cvreg | cvconst | likelihood | shrinkage")
          ->capture_default_str();
    app->add_option("--beta", beta, "global transfer weight")->capture_default_str();
    app->add_option("--alpha", alpha, "ridge / pseudocount")->capture_default_str();
    app->add_flag("--alpha-cv", alpha_cv, "use the median CV Reg alpha for hierarchical fits");
    app->add_option("--divergence", divergence, "l2 | l1 | eps")->capture_default_str();
    app->add_option("--epsilon", epsilon, "eps-insensitive dead zone")->capture_default_str();
    app->add_option("--smoothing", smoothing, "smoothed-L1 radius")->capture_default_str();
    if (with_method)
      app->add_option("--dot", dot, "none | bootstrap | hyperprior")->capture_default_str();
    app->add_option("--granularity", granularity, "coordinate | group")->capture_default_str();
    if (with_method)
      app->add_option("--dot-file", dot_file, "fixed DOT coefficients from `hbt bootstrap`");
    app->add_option("--resamples", resamples, "bootstrap resamples K")->capture_default_str();
    app->add_option("--variance-floor", variance_floor)->capture_default_str();
    app->add_option("--init", init, "ml | pooled")->capture_default_str();
    app->add_option("--max-iters", max_iters)->capture_default_str();
    app->add_option("--grad-tol", grad_tol)->capture_default_str();
    app->add_option("--block-mode", block_mode, "alternating | joint")->capture_default_str();
    app->add_option("--starts", starts, "hyperprior restarts")->capture_default_str();
    app->add_option("--alpha-grid", alpha_grid, "CV Reg candidates")->delimiter(',');
    app->add_option("--beta-grid", beta_grid, "CV Const candidates")->delimiter(',');
    app->add_option("--weight-grid", weight_grid, "shrinkage candidates")->delimiter(',');
    app->add_option("--cv-folds", cv_folds)->capture_default_str();
  }

  FitOptions options(const Hierarchy& h, std::uint64_t seed) const {
    FitOptions o;
    o.method = fit_method_from_string(method);
    o.objective.beta = beta;
    o.objective.alpha = alpha;
    o.objective.divergence.kind = divergence_from_string(divergence);
    o.objective.divergence.epsilon = epsilon;
    o.objective.divergence.smoothing = smoothing;
    o.objective.dot_mode = dot_mode_from_string(dot);
    o.objective.granularity = dot_granularity_from_string(granularity);
    o.alpha_from_cv = alpha_cv;
    o.bootstrap.resamples = resamples;
    o.bootstrap.variance_floor = variance_floor;
    o.bootstrap.seed = seed;
    o.init.kind = init_kind_from_string(init);
    o.optimizer.max_iters = max_iters;
    o.optimizer.grad_tol = grad_tol;
    o.optimizer.block_mode = block_mode_from_string(block_mode);
    o.optimizer.starts = starts;
    o.optimizer.seed = seed;
    o.alpha_grid = {alpha_grid, cv_folds, seed};
    o.beta_grid = {beta_grid, cv_folds, seed};
    o.weight_grid = {weight_grid, cv_folds, seed};
    if (!dot_file.empty()) o.dot = load_dot(read_text_file(dot_file), h, dot_file);
    return o;
  }
};

struct SynthFlags {
  std::string family = "gaussian";
  std::size_t depth = 1;
  std::size_t branching = 2;
  std::size_t dim = 10;
  double perturbation = 0.1;
  std::size_t train = 5;
  std::size_t test = 20;
  std::size_t test_total = 0;
  std::size_t doc_length = 50;
  double root_scale = 1.0;

  void add(CLI::App* app, bool with_train) {
    app->add_option("--family", family, "gaussian | multinomial")->capture_default_str();
    app->add_option("--depth", depth)->capture_default_str();
    app->add_option("--branching", branching)->capture_default_str();
    app->add_option("--dim", dim, "dimension or vocabulary size")->capture_default_str();
    app->add_option("--perturbation", perturbation)->capture_default_str();
    if (with_train) app->add_option("--train", train, "per leaf")->capture_default_str();
    app->add_option("--test", test, "per leaf")->capture_default_str();
    app->add_option("--test-total", test_total, "spread over leaves (overrides --test)");
    app->add_option("--doc-length", doc_length)->capture_default_str();
    app->add_option("--root-scale", root_scale)->capture_default_str();
  }

  SynthSpec spec(std::uint64_t seed) const {
    SynthSpec s;
    s.family = parse_family(family);
    s.depth = depth;
    s.branching = branching;
    s.dim = dim;
    s.perturbation = perturbation;
    s.train_count = train;
    s.test_count = test;
    if (test_total > 0) s.test_total = test_total;
    s.doc_length = doc_length;
    s.root_scale = root_scale;
    s.seed = seed;
    return s;
  }
};

std::string data_extension(Family f) { return f == Family::gaussian ? ".csv" : ".docs"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-hierarchy MAP estimation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a TOML/INI file");
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads for sweeps")->capture_default_str();

  // fit ---------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "fit a model and write a model file");
  std::string fit_hier, fit_data, fit_family = "gaussian", fit_out;
  ModelFlags fit_flags;
  fit->add_option("--hierarchy", fit_hier)->required();
  fit->add_option("--data", fit_data)->required();
  fit->add_option("--family", fit_family, "gaussian | multinomial")->capture_default_str();
  fit->add_option("-o,--out", fit_out, "model file")->required();
  fit_flags.add(fit, true);

  // eval --------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "test log-likelihood (and accuracy) of a model");
  std::string eval_model, eval_data, eval_out, eval_baseline, eval_label;
  bool eval_uniform = false;
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--baseline", eval_baseline, "second model file; adds deltas");
  eval->add_option("--label", eval_label, "method column");
  eval->add_option("-o,--out", eval_out, "also write the table here");
  eval->add_flag("--uniform-priors", eval_uniform);

  // classify ----------------------------------------------------------------
  auto* cls = app.add_subcommand("classify", "label documents with a multinomial model");
  std::string cls_model, cls_docs, cls_out;
  bool cls_uniform = false;
  cls->add_option("--model", cls_model)->required();
  cls->add_option("--docs", cls_docs)->required();
  cls->add_option("-o,--out", cls_out);
  cls->add_flag("--uniform-priors", cls_uniform);

  // synth -------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic transfer problem");
  SynthFlags synth_flags;
  std::string synth_dir;
  synth_flags.add(synth, true);
  synth->add_option("--out-dir", synth_dir)->required();

  // sweep -------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "methods x training size x folds on synthetic data");
  SynthFlags sweep_synth;
  ModelFlags sweep_flags;
  std::vector<std::string> sweep_methods_list{"cvreg", "hyperprior"};
  std::vector<std::size_t> sweep_sizes{3, 5, 10, 15};
  std::size_t sweep_folds = 5;
  std::string sweep_baseline = "cvreg", sweep_out, sweep_plot, sweep_hb_alpha = "cv";
  sweep_synth.add(sweep, false);
  sweep_flags.add(sweep, false);
  sweep->add_option("--methods", sweep_methods_list,
                    "cvreg likelihood cvconst bootstrap hyperprior hb shrinkage")
      ->delimiter(',');
  sweep->add_option("--sizes", sweep_sizes, "training instances per leaf")->delimiter(',');
  sweep->add_option("--folds", sweep_folds)->capture_default_str();
  sweep->add_option("--baseline", sweep_baseline)->capture_default_str();
  sweep->add_option("--hb-alpha", sweep_hb_alpha, "'cv' or a value")->capture_default_str();
  sweep->add_option("-o,--out", sweep_out, "table file");
  sweep->add_option("--plot", sweep_plot, "plot-data file");

  // bootstrap ---------------------------------------------------------------
  auto* boot = app.add_subcommand("bootstrap", "estimate DOT coefficients");
  std::string boot_hier, boot_data, boot_family = "gaussian", boot_out, boot_gran = "coordinate";
  double boot_alpha = 0.1, boot_floor = 1e-6;
  std::size_t boot_k = 50;
  boot->add_option("--hierarchy", boot_hier)->required();
  boot->add_option("--data", boot_data)->required();
  boot->add_option("--family", boot_family)->capture_default_str();
  boot->add_option("--alpha", boot_alpha)->capture_default_str();
  boot->add_option("--resamples", boot_k)->capture_default_str();
  boot->add_option("--variance-floor", boot_floor)->capture_default_str();
  boot->add_option("--granularity", boot_gran)->capture_default_str();
  boot->add_option("-o,--out", boot_out, "DOT file")->required();

  // tokenize ----------------------------------------------------------------
  auto* tok = app.add_subcommand("tokenize", "raw text to word-id documents");
  std::string tok_in, tok_vocab, tok_docs;
  std::size_t tok_min = 2;
  tok->add_option("--input", tok_in, "directory of <label>/ subdirectories, or label<TAB>text lines")
      ->required();
  tok->add_option("--min-count", tok_min, "drop rarer tokens")->capture_default_str();
  tok->add_option("--vocab-out", tok_vocab)->required();
  tok->add_option("--docs-out", tok_docs)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (fit->parsed()) {
      const Hierarchy h = parse_hierarchy(read_text_file(fit_hier), fit_hier);
      const HierarchyData data = load_data(fit_data, h, parse_family(fit_family), std::nullopt);
      const FitOptions opts = fit_flags.options(h, g.seed);
      const ModelFile model = fit_model(h, data, opts);
      write_text_file(fit_out, save_model(model));
      std::printf("method %s\nobjective %.10g\niterations %zu\nconverged %s\n",
                  model.method.c_str(), model.objective_value, model.iterations,
                  model.converged ? "true" : "false");
      if (!model.converged) {
        std::fprintf(stderr, "hbt fit: optimizer did not reach the gradient tolerance\n");
        return kNumerical;
      }
    } else if (eval->parsed()) {
      const ModelFile model = load_model(read_text_file(eval_model), eval_model);
      const HierarchyData test =
          load_data(eval_data, model.hierarchy, model.family, model.dim);
      EvalReport report = evaluate_model(model, test, {eval_label, eval_uniform});
      if (!eval_baseline.empty()) {
        const ModelFile base = load_model(read_text_file(eval_baseline), eval_baseline);
        report.set_baseline(evaluate_model(base, test, {"", eval_uniform}));
      }
      const std::string table = report.to_table();
      std::cout << table;
      if (!eval_out.empty()) write_text_file(eval_out, table);
    } else if (cls->parsed()) {
      const ModelFile model = load_model(read_text_file(cls_model), cls_model);
      const auto classes = leaf_multinomials(model);
      const auto priors = leaf_log_priors(model, cls_uniform);
      const DocumentFile docs = parse_document_records(read_text_file(cls_docs), cls_docs, model.dim);
      const auto leaves = model.hierarchy.leaves();
      std::string out;
      std::size_t labeled = 0, correct = 0;
      for (const auto& rec : docs.records) {
        const std::string& pred = model.hierarchy.name(leaves[classify(rec.doc, classes, priors)]);
        out += pred + "\t" + rec.label + "\n";
        if (model.hierarchy.find(rec.label)) {
          ++labeled;
          correct += pred == rec.label ? 1 : 0;
        }
      }
      if (labeled > 0) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "# accuracy\t%.10g\n",
                      static_cast<double>(correct) / static_cast<double>(labeled));
        out += buf;
      }
      write_or_print(cls_out, out);
    } else if (synth->parsed()) {
      const SynthSpec spec = synth_flags.spec(g.seed);
      const SynthResult r = synthesize(spec);
      fs::create_directories(synth_dir);
      const fs::path dir(synth_dir);
      const std::string ext = data_extension(spec.family);
      write_text_file((dir / "hierarchy.json").string(), hierarchy_to_json(r.hierarchy));
      write_text_file((dir / ("train" + ext)).string(), data_text(r.hierarchy, r.train));
      write_text_file((dir / ("test" + ext)).string(), data_text(r.hierarchy, r.test));
      write_text_file((dir / "truth.json").string(), save_model(truth_model(r, spec)));
    } else if (sweep->parsed()) {
      SweepOptions o;
      o.synth = sweep_synth.spec(g.seed);
      o.methods = sweep_methods_list;
      o.sizes = sweep_sizes;
      o.folds = sweep_folds;
      o.seed = g.seed;
      o.jobs = g.jobs;
      o.baseline = sweep_baseline;
      o.base = sweep_flags.options(complete_tree(o.synth.depth, o.synth.branching), g.seed);
      if (sweep_hb_alpha == "cv") {
        o.hb_alpha_cv = true;
      } else {
        o.hb_alpha_cv = false;
        o.base.objective.alpha = std::stod(sweep_hb_alpha);
      }
      const SweepResult r = run_sweep(o);
      std::cout << r.table();
      if (!sweep_out.empty()) write_text_file(sweep_out, r.table());
      if (!sweep_plot.empty()) write_text_file(sweep_plot, r.plot_data());
      for (const auto& c : r.cells)
        if (c.failed)
          std::fprintf(stderr, "hbt sweep: %s N=%zu fold %zu failed: %s\n", c.method.c_str(), c.n,
                       c.fold, c.error.c_str());
    } else if (boot->parsed()) {
      const Hierarchy h = parse_hierarchy(read_text_file(boot_hier), boot_hier);
      const HierarchyData data = load_data(boot_data, h, parse_family(boot_family), std::nullopt);
      BootstrapConfig cfg;
      cfg.resamples = boot_k;
      cfg.variance_floor = boot_floor;
      cfg.seed = g.seed;
      const DotCoefficients dot =
          bootstrap_dot(h, data, cfg, boot_alpha, {}, dot_granularity_from_string(boot_gran));
      write_text_file(boot_out, save_dot(h, dot));
    } else if (tok->parsed()) {
      const auto texts = fs::is_directory(tok_in) ? read_labeled_directory(tok_in)
                                                  : parse_labeled_lines(read_text_file(tok_in));
      const TokenizedCorpus corpus = build_corpus(texts, tok_min);
      write_text_file(tok_vocab, vocabulary_text(corpus));
      write_text_file(tok_docs, corpus_documents_text(corpus));
      std::printf("documents %zu\nvocabulary %zu\n", corpus.docs.size(), corpus.vocabulary.size());
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "hbt: numerical error: %s\n", e.what());
    return kNumerical;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "hbt: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "hbt: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hbt: %s\n", e.what());
    return kUsage;
  }
  return kOk;
}
