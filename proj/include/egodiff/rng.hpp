#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <vector>

namespace egodiff {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic generator with hand-rolled distributions. mt19937_64 output
// is fully specified by the standard and the distributions below avoid the
// implementation-defined ones in <random>, so a (seed, platform) pair of the
// same word size reproduces identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Standard normal via Box-Muller; consumes exactly two engine draws.
  double normal() {
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n). Multiply-shift; bias is < 2^-64.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // First k entries of a uniform permutation of {0, ..., n-1} (partial Fisher-Yates).
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k && i < n - 1; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k < n ? k : n);
    return idx;
  }

 private:
  std::mt19937_64 eng_;
};

// Stream tags so every consumer of randomness owns an independent substream.
namespace stream {
inline constexpr std::uint64_t trial = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t train = 3;
inline constexpr std::uint64_t truncate = 4;
inline constexpr std::uint64_t score = 5;
inline constexpr std::uint64_t synth = 6;
inline constexpr std::uint64_t profile = 7;
}  // namespace stream

// Derives an independent Rng from a root seed and a tag path, e.g.
// make_rng(seed, {stream::score, node, level, sample}).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::uint64_t s = seed ^ 0x6c0778ull;
  std::uint64_t h = splitmix64(s);
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h = splitmix64(s);
  }
  return Rng(h);
}

}  // namespace egodiff
