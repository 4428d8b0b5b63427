#include "hbt/crossval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hbt/random.hpp"

namespace hbt {

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: need k >= 2");
  if (k > n)
    throw std::invalid_argument("kfold_split: k = " + std::to_string(k) +
                                " exceeds dataset size " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, {n, k}));
  for (std::size_t i = n; i > 1; --i)
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(uniform_index(rng, i))]);

  std::vector<Fold> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    std::vector<bool> in_test(n, false);
    for (std::size_t j = 0; j < size; ++j) {
      folds[f].test.push_back(perm[pos + j]);
      in_test[perm[pos + j]] = true;
    }
    pos += size;
    std::sort(folds[f].test.begin(), folds[f].test.end());
    for (std::size_t i = 0; i < n; ++i)
      if (!in_test[i]) folds[f].train.push_back(i);
  }
  return folds;
}

std::vector<Fold> clamped_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<Fold> folds;
  if (n >= 2) folds = kfold_split(n, std::min(n, k), seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  while (folds.size() < k) folds.push_back(Fold{all, {}});
  return folds;
}

}  // namespace hbt
