#include "rng.hpp"

#include <cmath>

#include "common.hpp"

namespace ear {

Rng Rng::stream(std::uint64_t master_seed, std::string_view name, std::uint64_t index) {
  std::uint64_t h = fnv1a(name);
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(&master_seed), sizeof(master_seed)), h);
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(&index), sizeof(index)), h);
  return Rng(h);
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

}  // namespace ear
