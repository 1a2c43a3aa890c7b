#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tsdrd {

// Derives a child seed from a base seed and a stream index (splitmix64 walk).
// Used wherever a run needs several independent, reproducible streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact across
// platforms); all distribution transforms are implemented here so that
// sampled values do not depend on the standard library's distribution
// internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare value is cached, so draws come
  // in a fixed order regardless of call sites.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::size_t uniform_index(std::size_t n);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tsdrd
