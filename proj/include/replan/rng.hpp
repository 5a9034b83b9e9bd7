#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace replan {

// splitmix64 finalizer, used for seed derivation and stream splitting.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stable child-stream seed: the same (base, stream) always yields the same
// value on every platform. Used to give each scene / candidate / iteration
// its own independent stream.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return mix64(base ^ mix64(stream + 0x632be59bd9b4e019ull));
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}

// mt19937_64 supplies raw bits; every value mapping is hand-rolled because the
// std::*_distribution algorithms are implementation-defined and would break
// byte-identical reruns across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection sampling.
  uint64_t uniform_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const uint64_t cap = std::numeric_limits<uint64_t>::max();
    const uint64_t limit = cap - cap % n;
    uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    return lo + static_cast<int>(uniform_below(static_cast<uint64_t>(hi) - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, cosine branch only so each call consumes exactly two draws.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // CDF inversion over explicit nonnegative weights; deterministic given the
  // stream state.
  int categorical(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("categorical: no weights");
    double total = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0)
        throw std::invalid_argument("categorical: weights must be finite and nonnegative");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("categorical: zero total weight");
    const double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;  // fp tail
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = uniform_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace replan
