#include "dialsynth/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace dialsynth {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t attempt,
                          Stream stream) {
  std::uint64_t h = mix(master);
  h = mix(h ^ index);
  h = mix(h ^ attempt);
  return mix(h ^ static_cast<std::uint64_t>(stream));
}

std::size_t Rng::uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Reject the incomplete top bucket.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
  std::uint64_t x = engine_();
  while (x > limit) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

std::vector<std::size_t> Rng::choose(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("Rng::choose: k exceeds n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + uniform(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace dialsynth
