#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace hfadapt {

// SplitMix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Derives an independent stream seed from (seed, key).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) noexcept;

/// Seeded random source with a fully specified output sequence: a
/// std::mt19937_64 engine plus explicit conversions, so draws are identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  // Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Fisher-Yates shuffle driven by Rng::below.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Identity permutation of [0, n) shuffled with `seed`.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

}  // namespace hfadapt
