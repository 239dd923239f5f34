#ifndef FAIRRANK_RNG_HPP_
#define FAIRRANK_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fairrank {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stable seed for an independent stream (e.g. one per trial or fold).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Seeded generator with hand-rolled draws. std::mt19937_64 output is fully
/// specified by the standard; the <random> distributions are not, so every
/// distribution here is implemented on top of the raw engine output to keep
/// results reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1]; safe as a log() argument.
  double uniform01_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t rem = (UINT64_MAX % n + 1) % n;  // 2^64 mod n
    if (rem == 0) return next_u64() % n;
    const std::uint64_t limit = UINT64_MAX - rem + 1;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller (two engine draws per value).
  double normal() {
    const double u1 = uniform01_pos();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fairrank

#endif  // FAIRRANK_RNG_HPP_
