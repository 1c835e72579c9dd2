#pragma once

#include <cmath>
#include <cstdint>

namespace decmm::rng {

// splitmix64 finalizer; the workhorse behind all streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
}

// Stream purposes, hashed into the key so that the same (seed, agent, step)
// never aliases across uses.
enum class Purpose : std::uint64_t {
  DataGen = 1,
  SampleDraw = 2,
  InitDraw = 3,
  TauDraw = 4,
  GraphGen = 5,
  InitialPoint = 6,
  SeedExpand = 7,
};

constexpr std::uint64_t stream_key(std::uint64_t seed, Purpose purpose,
                                   std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed);
  h = combine(h, static_cast<std::uint64_t>(purpose));
  h = combine(h, a);
  h = combine(h, b);
  return h;
}

// Counter-based generator: output k is mix64(key + k*golden). Streams are
// cheap to construct and independent of thread scheduling, so any (agent,
// iteration) pair can be replayed in isolation.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t seed, Purpose purpose, std::uint64_t a = 0, std::uint64_t b = 0)
      : key_(stream_key(seed, purpose, a, b)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n >= 1. Multiply-shift map; bias is O(n/2^64).
  std::int64_t uniform_below(std::int64_t n) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
    return static_cast<std::int64_t>(wide >> 64);
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Master-seed expansion for multi-run sweeps; recorded in run summaries.
constexpr std::uint64_t expand_seed(std::uint64_t master, std::uint64_t index) {
  return stream_key(master, Purpose::SeedExpand, index);
}

}  // namespace decmm::rng
