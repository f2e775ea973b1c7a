#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace fedsim {

// splitmix64 (Steele, Lea, Flood). Used instead of <random> engines and
// distributions because every draw in a run must be identical across
// platforms and standard-library implementations; the standard does not pin
// distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Unbiased: rejects draws from the wrap-around
  // zone of the modulus.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_normal();

  // Fisher-Yates shuffle driven by next_below.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      T tmp = items[i - 1];
      items[i - 1] = items[j];
      items[j] = tmp;
    }
  }

 private:
  std::uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// Hash-derives the seed of an independent stream from a root seed and a
// logical path such as {phase, round, client}. Serial and parallel schedules
// that ask for the same path draw the same numbers, which is what makes
// worker count irrelevant to results.
std::uint64_t derive_stream(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> path);

inline Rng stream_rng(std::uint64_t seed,
                      std::initializer_list<std::uint64_t> path) {
  return Rng(derive_stream(seed, path));
}

// Stream namespace tags. Part of the reproducibility contract: changing any
// value changes every run keyed off it.
namespace stream_tag {
inline constexpr std::uint64_t sample = 0x01;
inline constexpr std::uint64_t client_train = 0x02;
inline constexpr std::uint64_t partition = 0x03;
inline constexpr std::uint64_t quad_base = 0x10;
inline constexpr std::uint64_t quad_cluster = 0x11;
inline constexpr std::uint64_t quad_client = 0x12;
inline constexpr std::uint64_t doc_cluster = 0x20;
inline constexpr std::uint64_t doc_content = 0x21;
inline constexpr std::uint64_t doc_mask = 0x22;
inline constexpr std::uint64_t doc_qa = 0x23;
}  // namespace stream_tag

}  // namespace fedsim
