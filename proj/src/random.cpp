#include "kbcd/random.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace kbcd {

std::uint64_t Stream::below(std::uint64_t bound) noexcept {
  if (bound <= 1) return 0;
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % bound;
}

double Stream::normal() {
  const double u = uniform();
  return std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
}

std::vector<std::size_t> random_permutation(std::size_t n, Stream& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    Stream& rng) {
  if (count > n) throw std::invalid_argument("sample_without_replacement: count > n");
  // Sparse Fisher-Yates: only touched positions are stored, so drawing a few
  // indices from a large universe stays O(count).
  std::unordered_map<std::size_t, std::size_t> moved;
  auto at = [&](std::size_t i) {
    auto it = moved.find(i);
    return it == moved.end() ? i : it->second;
  };
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    const std::size_t vi = at(i);
    const std::size_t vj = at(j);
    out.push_back(vj);
    moved[j] = vi;
  }
  return out;
}

}  // namespace kbcd
