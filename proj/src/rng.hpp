#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ear {

// Seeded random stream. All randomness in a run flows from a single master
// seed through named sub-streams (init, shuffle, bootstrap, ...), so every
// component draws from an independent, reproducible sequence. Distributions
// are hand-rolled on top of the raw mt19937_64 output because the standard
// ones are implementation-defined and would break cross-platform determinism.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Child stream derived from this stream's seed and a name (+ index).
  static Rng stream(std::uint64_t master_seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (one value per call; the pair's second
  // half is cached).
  double normal();

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace ear
