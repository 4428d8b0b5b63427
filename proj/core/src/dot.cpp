#include <cmath>
#include <stdexcept>
#include <string>

#include "hbt/transfer_objective.hpp"

namespace hbt {

TyingMask TyingMask::uniform(const Hierarchy& h, std::vector<bool> local) {
  TyingMask m;
  m.per_edge_.resize(h.size());
  for (auto [child, parent] : h.edges()) {
    (void)parent;
    m.per_edge_[child] = local;
  }
  return m;
}

TyingMask TyingMask::for_family(const Hierarchy& h, Family family, std::size_t dim) {
  if (family == Family::multinomial) return uniform(h, std::vector<bool>(dim, true));
  std::vector<bool> local(dim, true);
  const auto diag = packed_diagonal_mask(dim);
  local.insert(local.end(), diag.begin(), diag.end());
  return uniform(h, std::move(local));
}

bool TyingMask::tied(NodeId child, std::size_t local) const {
  const auto& e = per_edge_.at(child);
  return local < e.size() && e[local];
}

void TyingMask::set_edge(NodeId child, std::vector<bool> local) {
  per_edge_.at(child) = std::move(local);
}

std::string_view to_string(DotMode m) {
  switch (m) {
    case DotMode::none: return "none";
    case DotMode::fixed: return "fixed";
    case DotMode::hyperprior: return "hyperprior";
  }
  return "none";
}

DotMode dot_mode_from_string(std::string_view s) {
  if (s == "none") return DotMode::none;
  if (s == "fixed" || s == "bootstrap") return DotMode::fixed;
  if (s == "hyperprior") return DotMode::hyperprior;
  throw std::invalid_argument("unknown DOT mode '" + std::string(s) + "'");
}

std::string_view to_string(DotGranularity g) {
  return g == DotGranularity::per_group ? "group" : "coordinate";
}

DotGranularity dot_granularity_from_string(std::string_view s) {
  if (s == "coordinate") return DotGranularity::per_coordinate;
  if (s == "group") return DotGranularity::per_group;
  throw std::invalid_argument("unknown DOT granularity '" + std::string(s) + "'");
}

DotCoefficients DotCoefficients::constant(const Hierarchy& h, const ParamIndex& index,
                                          const TyingMask& mask, DotGranularity granularity,
                                          double value) {
  DotCoefficients dot;
  dot.granularity_ = granularity;
  for (auto [child, parent] : h.edges()) {
    EdgeDot e;
    e.child = child;
    e.parent = parent;
    e.slot.assign(index.node_dim(), -1);
    int next = 0;
    if (granularity == DotGranularity::per_coordinate) {
      for (std::size_t local = 0; local < index.node_dim(); ++local)
        if (mask.tied(child, local)) e.slot[local] = next++;
    } else {
      for (std::size_t g = 0; g < index.groups().size(); ++g) {
        bool any = false;
        const std::size_t off = index.group_offset(g);
        for (std::size_t k = 0; k < index.groups()[g].size; ++k)
          if (mask.tied(child, off + k)) {
            e.slot[off + k] = next;
            any = true;
          }
        if (any) ++next;
      }
    }
    e.lambda = Eigen::VectorXd::Constant(next, value);
    dot.edges_.push_back(std::move(e));
  }
  return dot;
}

const EdgeDot& DotCoefficients::edge_for(NodeId child) const {
  for (const auto& e : edges_)
    if (e.child == child) return e;
  throw std::invalid_argument("DOT coefficients: no edge above node " + std::to_string(child));
}

EdgeDot& DotCoefficients::edge_for(NodeId child) {
  for (auto& e : edges_)
    if (e.child == child) return e;
  throw std::invalid_argument("DOT coefficients: no edge above node " + std::to_string(child));
}

std::size_t DotCoefficients::slot_count() const {
  std::size_t n = 0;
  for (const auto& e : edges_) n += static_cast<std::size_t>(e.lambda.size());
  return n;
}

Eigen::VectorXd DotCoefficients::flatten() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(slot_count()));
  Eigen::Index k = 0;
  for (const auto& e : edges_) {
    out.segment(k, e.lambda.size()) = e.lambda;
    k += e.lambda.size();
  }
  return out;
}

void DotCoefficients::assign(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (static_cast<std::size_t>(flat.size()) != slot_count())
    throw std::invalid_argument("DOT coefficients: flat size mismatch");
  Eigen::Index k = 0;
  for (auto& e : edges_) {
    e.lambda = flat.segment(k, e.lambda.size());
    k += e.lambda.size();
  }
}

void DotCoefficients::validate() const {
  for (const auto& e : edges_)
    for (Eigen::Index i = 0; i < e.lambda.size(); ++i)
      if (!(std::isfinite(e.lambda[i]) && e.lambda[i] > 0.0))
        throw std::invalid_argument("DOT coefficients: lambda must be finite and > 0");
}

void DotCoefficients::check_covers(const TyingMask& mask) const {
  for (const auto& e : edges_) {
    for (std::size_t local = 0; local < e.slot.size(); ++local)
      if (mask.tied(e.child, local) &&
          (e.slot[local] < 0 || e.slot[local] >= e.lambda.size()))
        throw std::invalid_argument("DOT coefficients: missing lambda for a tied coordinate");
  }
  for (std::size_t child = 0; child < mask.node_count(); ++child)
    if (!mask.edge(child).empty()) (void)edge_for(child);
}

HyperpriorSpec HyperpriorSpec::with_mean(const DotCoefficients& mean, double shape) {
  if (!(shape > 1.0)) throw std::invalid_argument("hyperprior: shape must be > 1");
  mean.validate();
  HyperpriorSpec prior;
  prior.shape = shape;
  for (const auto& e : mean.edges()) prior.scale.push_back(e.lambda * (shape - 1.0));
  return prior;
}

void HyperpriorSpec::validate() const {
  if (!(shape > 1.0)) throw std::invalid_argument("hyperprior: shape must be > 1");
  for (const auto& s : scale)
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (!(std::isfinite(s[i]) && s[i] > 0.0))
        throw std::invalid_argument("hyperprior: scale must be finite and > 0");
}

double hyperprior_term(const DotCoefficients& dot, const HyperpriorSpec& prior) {
  dot.validate();
  if (prior.scale.size() != dot.edges().size())
    throw std::invalid_argument("hyperprior: scale layout does not match coefficients");
  double total = 0.0;
  for (std::size_t e = 0; e < dot.edges().size(); ++e) {
    const auto& lam = dot.edges()[e].lambda;
    const auto& b = prior.scale[e];
    if (b.size() != lam.size())
      throw std::invalid_argument("hyperprior: scale layout does not match coefficients");
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      total += (prior.shape + 1.0) * std::log(lam[i]) + b[i] / lam[i];
  }
  return total;
}

}  // namespace hbt
