#include "fedsim/rng.hpp"

#include <cmath>

namespace fedsim {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_below(std::uint64_t n) {
  // n == 0 would be a caller bug; loop forever rather than UB on % 0.
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::next_normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = 0.0;
  do {
    u1 = next_unit();
  } while (u1 <= 0.0);
  double u2 = next_unit();
  constexpr double two_pi = 6.283185307179586476925286766559;
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = two_pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

std::uint64_t derive_stream(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed ^ 0xa0761d6478bd642full);
  for (std::uint64_t v : path) {
    h = mix64(h ^ mix64(v + 0x589965cc75374cc3ull));
  }
  return h;
}

}  // namespace fedsim
