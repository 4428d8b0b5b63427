#include <cmath>
#include <stdexcept>
#include <string>

#include "hbt/transfer_objective.hpp"

namespace hbt {

std::string_view to_string(DivergenceKind k) {
  switch (k) {
    case DivergenceKind::l2: return "l2";
    case DivergenceKind::l1_smoothed: return "l1";
    case DivergenceKind::eps_insensitive: return "eps";
  }
  return "l2";
}

DivergenceKind divergence_from_string(std::string_view s) {
  if (s == "l2") return DivergenceKind::l2;
  if (s == "l1" || s == "l1-smoothed") return DivergenceKind::l1_smoothed;
  if (s == "eps" || s == "eps-insensitive") return DivergenceKind::eps_insensitive;
  throw std::invalid_argument("unknown divergence '" + std::string(s) + "'");
}

void DivergenceSpec::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("divergence: epsilon must be >= 0");
  if (kind == DivergenceKind::l1_smoothed && !(smoothing > 0.0))
    throw std::invalid_argument("divergence: L1 smoothing must be > 0");
}

PenaltyValue penalty(double diff, const DivergenceSpec& spec) {
  switch (spec.kind) {
    case DivergenceKind::l2:
      return {diff * diff, 2.0 * diff};
    case DivergenceKind::l1_smoothed: {
      const double r = std::hypot(diff, spec.smoothing);
      return {r - spec.smoothing, diff / r};
    }
    case DivergenceKind::eps_insensitive: {
      const double over = std::abs(diff) - spec.epsilon;
      if (over <= 0.0) return {0.0, 0.0};
      return {over * over, 2.0 * over * (diff > 0.0 ? 1.0 : -1.0)};
    }
  }
  return {};
}

}  // namespace hbt
