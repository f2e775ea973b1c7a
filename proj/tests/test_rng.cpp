#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "fedsim/rng.hpp"

using namespace fedsim;

TEST_CASE("equal seeds replay the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("next_unit stays in [0,1) and covers the range") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("next_below respects the bound and hits every value") {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    std::uint64_t v = rng.next_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("shuffle produces a permutation") {
  Rng rng(11);
  std::vector<int> items(50);
  for (int i = 0; i < 50; ++i) items[i] = i;
  std::vector<int> shuffled = items;
  rng.shuffle(std::span<int>(shuffled));
  CHECK(shuffled != items);  // 50! makes an identity shuffle astronomically rare
  std::vector<int> sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == items);
}

TEST_CASE("normal draws have roughly standard moments") {
  Rng rng(5);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = rng.next_normal();
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("derived streams differ across paths and match across calls") {
  CHECK(derive_stream(1, {2, 3}) == derive_stream(1, {2, 3}));
  CHECK(derive_stream(1, {2, 3}) != derive_stream(1, {3, 2}));
  CHECK(derive_stream(1, {2, 3}) != derive_stream(2, {2, 3}));
  CHECK(derive_stream(1, {2}) != derive_stream(1, {2, 0}));
}
