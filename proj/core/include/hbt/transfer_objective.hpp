#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hbt/dataset.hpp"
#include "hbt/hierarchy.hpp"
#include "hbt/likelihoods.hpp"
#include "hbt/param_index.hpp"

namespace hbt {

// ---------------------------------------------------------------------------
// Per-coordinate divergences between a child parameter and its parent's.

enum class DivergenceKind { l2, l1_smoothed, eps_insensitive };

std::string_view to_string(DivergenceKind k);
DivergenceKind divergence_from_string(std::string_view s);

struct DivergenceSpec {
  DivergenceKind kind = DivergenceKind::l2;
  double epsilon = 0.0;     // dead zone half-width, eps-insensitive only
  double smoothing = 1e-3;  // L1 smoothing radius

  void validate() const;
};

struct PenaltyValue {
  double value = 0.0;
  double derivative = 0.0;
};

/// L2: d^2. Smoothed L1: sqrt(d^2 + s^2) - s. Eps-insensitive:
/// max(0, |d| - eps)^2.
PenaltyValue penalty(double diff, const DivergenceSpec& spec);

// ---------------------------------------------------------------------------
// Which node-local coordinates are tied across each edge.

class TyingMask {
 public:
  TyingMask() = default;
  /// Same local mask on every edge.
  static TyingMask uniform(const Hierarchy& h, std::vector<bool> local);
  /// Gaussian: mean and diagonal precision tied, off-diagonal free.
  /// Multinomial: every logit tied.
  static TyingMask for_family(const Hierarchy& h, Family family, std::size_t dim);

  bool empty() const { return per_edge_.empty(); }
  bool tied(NodeId child, std::size_t local) const;
  /// Local mask of the edge above `child`; empty for the root.
  const std::vector<bool>& edge(NodeId child) const { return per_edge_.at(child); }
  void set_edge(NodeId child, std::vector<bool> local);
  std::size_t node_count() const { return per_edge_.size(); }

 private:
  std::vector<std::vector<bool>> per_edge_;  // indexed by child id
};

// ---------------------------------------------------------------------------
// Degree-of-transfer coefficients.

enum class DotGranularity { per_coordinate, per_group };
enum class DotMode { none, fixed, hyperprior };

std::string_view to_string(DotMode m);
DotMode dot_mode_from_string(std::string_view s);
std::string_view to_string(DotGranularity g);
DotGranularity dot_granularity_from_string(std::string_view s);

/// Coefficients on one edge. `slot[local]` maps a node-local coordinate to its
/// entry in `lambda`, or -1 for untied coordinates.
struct EdgeDot {
  NodeId child = 0;
  NodeId parent = 0;
  std::vector<int> slot;
  Eigen::VectorXd lambda;
};

class DotCoefficients {
 public:
  DotCoefficients() = default;
  DotCoefficients(std::vector<EdgeDot> edges, DotGranularity granularity)
      : edges_(std::move(edges)), granularity_(granularity) {}
  /// Every slot set to `value`.
  static DotCoefficients constant(const Hierarchy& h, const ParamIndex& index,
                                  const TyingMask& mask, DotGranularity granularity,
                                  double value);

  const std::vector<EdgeDot>& edges() const { return edges_; }
  std::vector<EdgeDot>& edges() { return edges_; }
  const EdgeDot& edge_for(NodeId child) const;
  EdgeDot& edge_for(NodeId child);
  DotGranularity granularity() const { return granularity_; }

  std::size_t slot_count() const;
  /// All lambdas concatenated in edge order.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::Ref<const Eigen::VectorXd>& flat);
  /// Throws std::invalid_argument on any lambda that is not finite and > 0.
  void validate() const;
  /// Throws std::invalid_argument unless every tied coordinate of `mask` has a slot.
  void check_covers(const TyingMask& mask) const;

 private:
  std::vector<EdgeDot> edges_;
  DotGranularity granularity_ = DotGranularity::per_coordinate;
};

/// Inverse-Gamma hyperprior over every lambda slot. `scale` mirrors the slot
/// layout of the coefficients it was built from.
struct HyperpriorSpec {
  double shape = 2.0;
  std::vector<Eigen::VectorXd> scale;  // per edge, in DotCoefficients edge order

  /// b = value * (shape - 1), so the prior mean equals the given coefficients.
  static HyperpriorSpec with_mean(const DotCoefficients& mean, double shape = 2.0);
  void validate() const;
};

/// sum over slots of (a + 1) log(lambda) + b / lambda.
double hyperprior_term(const DotCoefficients& dot, const HyperpriorSpec& prior);

// ---------------------------------------------------------------------------

struct ObjectiveConfig {
  double beta = 1.0;
  double alpha = 0.0;
  DivergenceSpec divergence;
  TyingMask mask;  // empty: family default
  DotMode dot_mode = DotMode::none;
  DotGranularity granularity = DotGranularity::per_coordinate;

  void validate() const;
};

/// beta * sum over edges and tied coordinates of penalty(child - parent) / lambda.
double transfer_penalty(const ParamState& state, const Hierarchy& h,
                        const DotCoefficients& dot, const ObjectiveConfig& config);

/// Joint MAP objective over the free vector x = [theta] or, in hyperprior
/// mode, x = [theta; log lambda]. Per-node sufficient statistics (ridge
/// applied) are cached at construction.
class TransferObjective {
 public:
  TransferObjective(const Hierarchy& h, const HierarchyData& data, ObjectiveConfig config,
                    DotCoefficients dot, std::optional<HyperpriorSpec> prior = std::nullopt);

  const ParamIndex& index() const { return index_; }
  const Hierarchy& hierarchy() const { return *h_; }
  const ObjectiveConfig& config() const { return config_; }
  Family family() const { return family_; }
  std::size_t dim() const { return dim_; }
  bool optimizes_lambda() const { return config_.dot_mode == DotMode::hyperprior; }

  std::size_t theta_dim() const { return index_.total_dim(); }
  std::size_t free_dim() const;

  /// Builds x from parameters and (in hyperprior mode) the current lambdas.
  Eigen::VectorXd pack(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd pack(const Eigen::VectorXd& theta, const DotCoefficients& dot) const;
  /// Coefficients in effect at x (the fixed ones outside hyperprior mode).
  DotCoefficients dot_at(const Eigen::VectorXd& x) const;
  const DotCoefficients& base_dot() const { return dot_; }

  /// Every node whose precision enters a likelihood or penalty is Cholesky
  /// factorizable (Gaussian); always true for multinomial.
  bool feasible(const Eigen::VectorXd& x) const;

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

  /// Components, for diagnostics and oracle checks.
  double data_loglik(const Eigen::VectorXd& x) const;  // sum of data terms
  /// Diagonal of the Hessian of -data_loglik over the theta coordinates.
  Eigen::VectorXd data_curvature(const Eigen::VectorXd& x) const;
  double penalty_term(const Eigen::VectorXd& x) const;
  double prior_term(const Eigen::VectorXd& x) const;

 private:
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;

  const Hierarchy* h_;
  Family family_;
  std::size_t dim_;
  ParamIndex index_;
  ObjectiveConfig config_;
  DotCoefficients dot_;
  std::optional<HyperpriorSpec> prior_;
  std::vector<std::optional<GaussianStats>> gaussian_;
  std::vector<std::optional<CountStats>> counts_;
};

double joint_objective(const TransferObjective& objective, const Eigen::VectorXd& x);
Eigen::VectorXd joint_gradient(const TransferObjective& objective, const Eigen::VectorXd& x);

/// Parameter views of one node of a flat state.
GaussianParams gaussian_params(const ParamState& state, NodeId node);
MultinomialParams multinomial_params(const ParamState& state, NodeId node);
void set_gaussian_params(ParamState& state, NodeId node, const GaussianParams& p);
void set_multinomial_params(ParamState& state, NodeId node, const MultinomialParams& p);

}  // namespace hbt
