#include "hbt/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "hbt/random.hpp"

namespace hbt {

std::string_view to_string(FitMethod m) {
  switch (m) {
    case FitMethod::map: return "map";
    case FitMethod::cvreg: return "cvreg";
    case FitMethod::cvconst: return "cvconst";
    case FitMethod::likelihood: return "likelihood";
    case FitMethod::shrinkage: return "shrinkage";
  }
  return "?";
}

FitMethod fit_method_from_string(std::string_view s) {
  for (FitMethod m : {FitMethod::map, FitMethod::cvreg, FitMethod::cvconst,
                      FitMethod::likelihood, FitMethod::shrinkage})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown method '" + std::string(s) +
                              "' (expected map, cvreg, cvconst, likelihood or shrinkage)");
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double median_cv_alpha(const Hierarchy& h, const HierarchyData& train, const CvGrid& grid) {
  const auto est = fit_cvreg(h, train, grid);
  std::vector<double> a;
  for (const auto& e : est) a.push_back(e.alpha);
  std::sort(a.begin(), a.end());
  return a[(a.size() - 1) / 2];  // lower median: always a grid value
}

}  // namespace

ModelFile fit_model(const Hierarchy& h, const HierarchyData& train, const FitOptions& o) {
  train.require_leaf_data(h);
  ModelFile m;
  m.hierarchy = h;
  m.family = train.family;
  m.dim = train.dim;
  m.method = std::string(to_string(o.method));
  m.divergence = o.objective.divergence;
  m.class_counts.assign(h.size(), 0.0);
  for (NodeId n = 0; n < h.size(); ++n)
    if (const Dataset* d = train.find(n)) m.class_counts[n] = static_cast<double>(d->size());
  m.params.assign(h.size(), std::nullopt);

  ObjectiveConfig cfg = o.objective;
  if (o.alpha_from_cv && (o.method == FitMethod::map || o.method == FitMethod::cvconst))
    cfg.alpha = median_cv_alpha(h, train, o.alpha_grid);
  m.alpha = cfg.alpha;
  m.beta = cfg.beta;

  auto store_state = [&](const FitResult& fit) {
    for (NodeId n = 0; n < h.size(); ++n) m.params[n] = node_params(fit.state, m.family, n);
    m.objective_value = fit.objective_value;
    m.iterations = fit.iterations;
    m.converged = fit.converged;
  };

  switch (o.method) {
    case FitMethod::map: {
      m.dot_mode = cfg.dot_mode;
      std::optional<DotCoefficients> dot = o.dot;
      if (cfg.dot_mode != DotMode::none && !dot)
        dot = bootstrap_dot(h, train, o.bootstrap, cfg.alpha, cfg.mask, cfg.granularity);
      const FitResult fit = fit_map(h, train, cfg, dot, std::nullopt, o.optimizer, o.init);
      store_state(fit);
      if (cfg.dot_mode != DotMode::none) m.dot = fit.dot;
      break;
    }
    case FitMethod::cvconst: {
      const CvConstResult r = fit_cvconst(h, train, cfg, o.beta_grid, o.optimizer);
      m.beta = r.beta;
      m.dot_mode = DotMode::none;
      store_state(r.fit);
      break;
    }
    case FitMethod::cvreg: {
      m.leaf_alpha.assign(h.size(), 0.0);
      for (const auto& e : fit_cvreg(h, train, o.alpha_grid)) {
        m.params[e.node] = e.params;
        m.leaf_alpha[e.node] = e.alpha;
      }
      m.beta = 0.0;
      m.alpha = 0.0;
      break;
    }
    case FitMethod::likelihood: {
      m.params = fit_likelihood(h, train);
      m.beta = 0.0;
      m.alpha = 0.0;
      break;
    }
    case FitMethod::shrinkage: {
      const ShrinkageResult r = fit_shrinkage(h, train, o.weight_grid, o.shrinkage_alpha);
      for (NodeId n = 0; n < h.size(); ++n) m.params[n] = r.params[n];
      m.beta = 0.0;
      m.alpha = o.shrinkage_alpha;
      // Interpolation weight of each node's level.
      m.leaf_alpha.assign(h.size(), 0.0);
      for (NodeId n = 0; n < h.size(); ++n)
        m.leaf_alpha[n] = h.depth(n) < r.level_weights.size() ? r.level_weights[h.depth(n)] : 0.0;
      break;
    }
  }
  return m;
}

std::vector<MultinomialParams> leaf_multinomials(const ModelFile& model) {
  if (model.family != Family::multinomial)
    throw std::invalid_argument("classification needs a multinomial model");
  std::vector<MultinomialParams> out;
  for (NodeId leaf : model.hierarchy.leaves()) {
    const auto& p = model.params.at(leaf);
    if (!p) throw std::invalid_argument("model has no parameters for leaf '" +
                                        model.hierarchy.name(leaf) + "'");
    out.push_back(std::get<MultinomialParams>(*p));
  }
  return out;
}

std::vector<double> leaf_log_priors(const ModelFile& model, bool uniform) {
  std::vector<double> counts;
  for (NodeId leaf : model.hierarchy.leaves())
    counts.push_back(leaf < model.class_counts.size() ? model.class_counts[leaf] : 0.0);
  return class_log_priors(counts, uniform);
}

EvalReport evaluate_model(const ModelFile& model, const HierarchyData& test,
                          const EvalOptions& options) {
  if (test.family != model.family)
    throw std::invalid_argument("test data family does not match the model");
  if (test.dim != model.dim)
    throw std::invalid_argument((model.family == Family::gaussian ? "dimension" : "vocabulary") +
                                std::string(" mismatch: model ") + std::to_string(model.dim) +
                                ", test data " + std::to_string(test.dim));
  const Hierarchy& h = model.hierarchy;
  if (test.per_node.size() != h.size())
    throw std::invalid_argument("test data does not match the model hierarchy");

  EvalReport report;
  const std::string label = options.label.empty() ? model.method : options.label;
  for (NodeId leaf : h.leaves()) {
    const Dataset* d = test.find(leaf);
    if (!d || d->empty()) continue;
    const auto& p = model.params.at(leaf);
    if (!p) throw std::invalid_argument("model has no parameters for leaf '" + h.name(leaf) + "'");
    EvalRow row;
    row.method = label;
    row.cls = h.name(leaf);
    row.n_train = static_cast<std::size_t>(leaf < model.class_counts.size() ? model.class_counts[leaf] : 0.0);
    row.n_test = d->size();
    row.nats_per_instance = dataset_loglik(*p, *d) / static_cast<double>(d->size());
    row.bits_per_instance = row.nats_per_instance / std::log(2.0);
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) throw std::invalid_argument("test set is empty");

  if (model.family == Family::multinomial) {
    const auto classes = leaf_multinomials(model);
    const auto priors = leaf_log_priors(model, options.uniform_priors);
    std::vector<LabeledDoc> docs;
    const auto leaves = h.leaves();
    for (std::size_t rank = 0; rank < leaves.size(); ++rank)
      if (const Dataset* d = test.find(leaves[rank]))
        for (const auto& doc : d->docs) docs.push_back({rank, doc});
    report.accuracy = accuracy(docs, classes, priors);
    report.vocabulary_size = model.dim;
  }
  return report;
}

double mean_bits(const EvalReport& report) {
  if (report.rows.empty()) throw std::invalid_argument("mean_bits: empty report");
  double s = 0.0;
  for (const auto& r : report.rows) s += r.bits_per_instance;
  return s / static_cast<double>(report.rows.size());
}

std::size_t compact_vocabulary(HierarchyData& a, HierarchyData& b) {
  if (a.family != Family::multinomial || b.family != Family::multinomial || a.dim != b.dim)
    throw std::invalid_argument("compact_vocabulary: needs two document sets over one vocabulary");
  std::vector<bool> seen(a.dim, false);
  for (const HierarchyData* hd : {&a, &b})
    for (const auto& d : hd->per_node)
      if (d)
        for (const auto& doc : d->docs)
          for (auto id : doc.ids) seen[id] = true;
  std::vector<std::uint32_t> remap(a.dim, 0);
  std::uint32_t next = 0;
  for (std::size_t w = 0; w < a.dim; ++w)
    if (seen[w]) remap[w] = next++;
  for (HierarchyData* hd : {&a, &b}) {
    hd->dim = next;
    for (auto& d : hd->per_node) {
      if (!d) continue;
      d->dim = next;
      for (auto& doc : d->docs)
        for (auto& id : doc.ids) id = remap[id];
    }
  }
  return next;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& sweep_methods() {
  static const std::vector<std::string> names{"cvreg",     "likelihood", "cvconst", "bootstrap",
                                              "hyperprior", "hb",        "shrinkage"};
  return names;
}

namespace {

std::uint64_t name_key(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

bool is_hierarchical(const std::string& method) {
  return method == "bootstrap" || method == "hyperprior" || method == "hb" || method == "cvconst";
}

}  // namespace

SynthResult sweep_fold_data(const SweepOptions& options, std::size_t fold) {
  SynthSpec spec = options.synth;
  spec.train_count = *std::max_element(options.sizes.begin(), options.sizes.end());
  spec.seed = derive_seed(options.seed, {fold});
  return synthesize(spec);
}

FitOptions sweep_cell_options(const SweepOptions& options, const std::string& method,
                              std::size_t n, std::size_t fold) {
  if (std::find(sweep_methods().begin(), sweep_methods().end(), method) == sweep_methods().end())
    throw std::invalid_argument("unknown sweep method '" + method + "'");
  FitOptions o = options.base;
  const std::uint64_t cell_seed = derive_seed(options.seed, {n, fold, name_key(method)});
  // The alpha grid seed depends only on (N, fold) so that every method sees
  // the same CV Reg choices.
  o.alpha_grid.seed = derive_seed(options.seed, {n, fold, name_key("cvreg")});
  o.beta_grid.seed = cell_seed;
  o.weight_grid.seed = cell_seed;
  o.bootstrap.seed = cell_seed;
  o.optimizer.seed = cell_seed;
  o.alpha_from_cv = is_hierarchical(method) && options.hb_alpha_cv;

  if (method == "cvreg") {
    o.method = FitMethod::cvreg;
  } else if (method == "likelihood") {
    o.method = FitMethod::likelihood;
  } else if (method == "cvconst") {
    o.method = FitMethod::cvconst;
  } else if (method == "shrinkage") {
    o.method = FitMethod::shrinkage;
  } else {
    o.method = FitMethod::map;
    o.objective.beta = 1.0;
    o.objective.dot_mode = method == "bootstrap"    ? DotMode::fixed
                           : method == "hyperprior" ? DotMode::hyperprior
                                                    : DotMode::none;
  }
  return o;
}

SweepCell run_sweep_cell(const SweepOptions& options, const SynthResult& fold_data,
                         const std::string& method, std::size_t n, std::size_t fold) {
  SweepCell cell{method, n, fold, 0.0, false, {}};
  try {
    HierarchyData train = take_prefix(fold_data.train, n);
    HierarchyData test = fold_data.test;
    if (train.family == Family::multinomial) compact_vocabulary(train, test);
    const ModelFile model = fit_model(fold_data.hierarchy, train,
                                      sweep_cell_options(options, method, n, fold));
    const EvalReport report = evaluate_model(model, test);
    cell.metric = train.family == Family::gaussian ? mean_bits(report) : *report.accuracy;
  } catch (const NumericalError& e) {
    cell.failed = true;
    cell.error = e.what();
    cell.metric = std::nan("");
  }
  return cell;
}

SweepResult run_sweep(const SweepOptions& options) {
  if (options.methods.empty()) throw std::invalid_argument("sweep: no methods");
  if (options.sizes.empty()) throw std::invalid_argument("sweep: no training sizes");
  if (options.folds == 0) throw std::invalid_argument("sweep: folds must be >= 1");
  for (const auto& m : options.methods) sweep_cell_options(options, m, 1, 0);  // validates names
  for (std::size_t n : options.sizes)
    if (n == 0) throw std::invalid_argument("sweep: training sizes must be positive");

  std::vector<SynthResult> folds;
  for (std::size_t f = 0; f < options.folds; ++f) folds.push_back(sweep_fold_data(options, f));

  SweepResult result;
  result.family = options.synth.family;
  result.baseline = options.baseline;
  for (const auto& m : options.methods)
    for (std::size_t n : options.sizes)
      for (std::size_t f = 0; f < options.folds; ++f) result.cells.push_back({m, n, f, 0.0, false, {}});

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < result.cells.size(); i = next++) {
      SweepCell& c = result.cells[i];
      try {
        c = run_sweep_cell(options, folds[c.fold], c.method, c.n, c.fold);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, result.cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return result;
}

const SweepCell& SweepResult::cell(const std::string& method, std::size_t n,
                                   std::size_t fold) const {
  for (const auto& c : cells)
    if (c.method == method && c.n == n && c.fold == fold) return c;
  throw std::out_of_range("no sweep cell " + method + "/" + std::to_string(n) + "/" +
                          std::to_string(fold));
}

namespace {

struct Summary {
  double mean = 0.0;
  std::optional<double> delta;
  std::size_t wins = 0;
  std::size_t failed = 0;
};

std::vector<std::pair<std::pair<std::string, std::size_t>, Summary>> summarize(
    const SweepResult& r) {
  std::vector<std::string> methods;
  std::vector<std::size_t> sizes;
  std::size_t folds = 0;
  for (const auto& c : r.cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
      methods.push_back(c.method);
    if (std::find(sizes.begin(), sizes.end(), c.n) == sizes.end()) sizes.push_back(c.n);
    folds = std::max(folds, c.fold + 1);
  }
  const bool has_base =
      std::find(methods.begin(), methods.end(), r.baseline) != methods.end();
  std::vector<std::pair<std::pair<std::string, std::size_t>, Summary>> out;
  for (const auto& m : methods)
    for (std::size_t n : sizes) {
      Summary s;
      double delta = 0.0;
      for (std::size_t f = 0; f < folds; ++f) {
        const SweepCell& c = r.cell(m, n, f);
        s.failed += c.failed ? 1 : 0;
        s.mean += c.metric;
        if (has_base) {
          const double d = c.metric - r.cell(r.baseline, n, f).metric;
          delta += d;
          s.wins += d > 0.0 ? 1 : 0;
        }
      }
      s.mean /= static_cast<double>(folds);
      if (has_base) s.delta = delta / static_cast<double>(folds);
      out.push_back({{m, n}, s});
    }
  return out;
}

}  // namespace

std::string SweepResult::table() const {
  std::string out = std::string("# metric ") +
                    (family == Family::gaussian ? "bits_per_instance" : "accuracy") +
                    "\n# baseline " + baseline + "\n" +
                    "method\tN\tmean\tdelta\twins\tfailed\n";
  for (const auto& [key, s] : summarize(*this)) {
    out += key.first + "\t" + std::to_string(key.second) + "\t" + fmt(s.mean) + "\t" +
           (s.delta ? fmt(*s.delta) : std::string("NA")) + "\t" + std::to_string(s.wins) + "\t" +
           std::to_string(s.failed) + "\n";
  }
  return out;
}

std::string SweepResult::plot_data() const {
  std::string out;
  std::string current;
  for (const auto& [key, s] : summarize(*this)) {
    if (key.first != current) {
      if (!current.empty()) out += "\n\n";
      out += "# " + key.first + "\n";
      current = key.first;
    }
    out += std::to_string(key.second) + " " + fmt(s.delta ? *s.delta : s.mean) + "\n";
  }
  return out;
}

ModelFile truth_model(const SynthResult& synth, const SynthSpec& spec) {
  ModelFile m;
  m.hierarchy = synth.hierarchy;
  m.family = spec.family;
  m.dim = spec.dim;
  m.method = "truth";
  m.params.assign(synth.truth.begin(), synth.truth.end());
  m.class_counts.assign(synth.hierarchy.size(), 0.0);
  for (NodeId n = 0; n < synth.hierarchy.size(); ++n)
    if (const Dataset* d = synth.train.find(n)) m.class_counts[n] = static_cast<double>(d->size());
  return m;
}

}  // namespace hbt
