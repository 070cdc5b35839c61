#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "ula/common.hpp"

namespace ula {

// Single PRNG discipline for the whole project: a mt19937_64 engine plus
// hand-rolled sampling helpers, so draws depend only on the raw 64-bit
// stream and stay reproducible across standard libraries.
//
// Substreams are derived from the *base* seed and a stage name
// ("datagen", "augment", "init", "shuffle", ...), never from engine
// state, so stages cannot perturb each other's streams.
class Rng {
 public:
  explicit Rng(uint64_t seed) : base_seed_(seed), gen_(splitmix64(seed)) {}

  Rng substream(std::string_view name) const {
    return Rng(splitmix64(base_seed_ ^ fnv1a64(name)));
  }

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  uint64_t uniform_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below(0)");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(
                    uniform_below(static_cast<uint64_t>(hi_inclusive - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (size_t i = xs.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  uint64_t base_seed() const { return base_seed_; }

 private:
  uint64_t base_seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ula
