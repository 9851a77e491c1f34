#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

#include "privbcast/types.hpp"

namespace privbcast {

// Independent randomness per purpose, so that changing how much one
// subsystem draws never shifts the draws seen by another.
enum class Stream : std::uint64_t {
  kTopology = 1,
  kGroups = 2,
  kShares = 3,
  kToken = 4,
  kAdversary = 5,
  kWorkload = 6,
  kBackoff = 7,
  kChurn = 8,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed for (master, stream, index), built from a splitmix64 counter chain.
std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) noexcept;

// Thin wrapper over mt19937_64. Bounded draws and shuffles are implemented
// here rather than with <random> distributions so that sequences do not
// depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, Stream stream, std::uint64_t index = 0)
      : engine_(derive_seed(master, stream, index)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Uniform in [lo, hi], inclusive.
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform() < p); }

  void fill(std::span<std::uint8_t> out);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace privbcast
