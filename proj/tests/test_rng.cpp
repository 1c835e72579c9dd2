#include <doctest.h>

#include <cmath>
#include <set>

#include "decmm/rng.hpp"

using namespace decmm;

TEST_CASE("rng streams are deterministic and keyed") {
  rng::Stream a(42, rng::Purpose::SampleDraw, 3, 7);
  rng::Stream b(42, rng::Purpose::SampleDraw, 3, 7);
  rng::Stream c(42, rng::Purpose::SampleDraw, 3, 8);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
  }
}

TEST_CASE("purposes do not alias") {
  rng::Stream a(42, rng::Purpose::SampleDraw, 0, 0);
  rng::Stream b(42, rng::Purpose::DataGen, 0, 0);
  CHECK(a.next_u64() != b.next_u64());
}

TEST_CASE("uniform_below stays in range and covers values") {
  rng::Stream s(1, rng::Purpose::SampleDraw);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = s.uniform_below(10);
    REQUIRE(v >= 0);
    REQUIRE(v < 10);
    seen.insert(v);
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("uniform_below is roughly uniform") {
  rng::Stream s(7, rng::Purpose::SampleDraw);
  constexpr int kBuckets = 16;
  constexpr int kDraws = 160000;
  int counts[kBuckets] = {};
  for (int i = 0; i < kDraws; ++i) ++counts[s.uniform_below(kBuckets)];
  const double expected = static_cast<double>(kDraws) / kBuckets;
  for (int b = 0; b < kBuckets; ++b) {
    CHECK(std::abs(counts[b] - expected) < 5.0 * std::sqrt(expected));
  }
}

TEST_CASE("normal draws have sane moments") {
  rng::Stream s(9, rng::Purpose::DataGen);
  constexpr int kDraws = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const double x = s.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / kDraws;
  const double var = sum_sq / kDraws - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("expand_seed differs per index") {
  CHECK(rng::expand_seed(5, 0) != rng::expand_seed(5, 1));
  CHECK(rng::expand_seed(5, 0) == rng::expand_seed(5, 0));
}
