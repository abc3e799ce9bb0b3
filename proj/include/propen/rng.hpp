#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace propen {

// Seeded random source. Only the raw 64-bit engine output is used so that
// streams are reproducible across standard library implementations
// (std::*_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Independent stream seed for (base, stream) via splitmix64 finalization.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace propen
