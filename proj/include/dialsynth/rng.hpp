#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dialsynth {

/// Stream identifiers mixed into per-sample sub-seeds so that structure,
/// template choice and refinement draw from independent streams.
enum class Stream : std::uint64_t { structure = 0, templates = 1, refinement = 2, retrieval = 3 };

/// splitmix64 finalizer over (master, index, attempt, stream). A sample's
/// stream depends on nothing but these four values.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t attempt = 0,
                          Stream stream = Stream::structure);

/// Seeded pseudo-random stream owned by the caller. Bounded draws use
/// rejection sampling over the raw 64-bit output so sequences do not depend
/// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n); n must be positive.
  std::size_t uniform(std::size_t n);

  /// Uniform integer in [lo, hi]; requires lo <= hi.
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + uniform(hi - lo + 1); }

  /// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> choose(std::size_t n, std::size_t k);

  template <class T>
  const T& pick(std::span<const T> items) {
    return items[uniform(items.size())];
  }
  template <class T>
  const T& pick(const std::vector<T>& items) {
    return items[uniform(items.size())];
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dialsynth
