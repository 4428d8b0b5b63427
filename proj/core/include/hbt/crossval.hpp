#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace hbt {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, n) cut into k near-equal test folds; the first
/// n % k folds get one extra item. Throws std::invalid_argument if k < 2 or
/// k > n.
std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

/// kfold_split with k clamped to n (leave-one-out when n < k). Returns
/// exactly k folds; folds past the clamped count have empty test sets and
/// train on everything. n < 2 yields folds with empty test sets.
std::vector<Fold> clamped_folds(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace hbt
