#pragma once

// Portable seeded randomness. std::mt19937_64 is bit-specified by the
// standard, but the <random> distributions and std::shuffle are not, so the
// mapping from raw bits to doubles, bounded integers and permutations lives
// here. Every consumer derives its own stream from (run seed, purpose, ...)
// so that draws made by one module never shift the draws of another.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace dasc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Mixes a base seed with any number of stream tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(base);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x632BE59BD9B4E019ULL));
  return h;
}

enum class Stream : std::uint64_t {
  damage = 1,
  scenario = 2,
  placement = 3,
  allocation = 4,
  routing = 5,
  scouts = 6,
  movement = 7,
  baseline = 8,
  estimator = 9,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t base, Stream s, std::initializer_list<std::uint64_t> tags = {})
      : engine_(derive(base, s, tags)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  /// Uniform integer in [lo, hi] inclusive.
  int between(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t derive(std::uint64_t base, Stream s, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = derive_seed(base, {static_cast<std::uint64_t>(s)});
    for (auto t : tags) h = splitmix64(h ^ splitmix64(t + 0x2545F4914F6CDD1DULL));
    return h;
  }

  std::mt19937_64 engine_;
};

}  // namespace dasc
