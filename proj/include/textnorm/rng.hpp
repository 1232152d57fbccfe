#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace textnorm {

// Deterministic RNG used by every component. Wraps mt19937_64 and derives
// uniform doubles from the raw 64-bit stream directly, so values do not
// depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform index in [0, n). n must be > 0.
  size_t index(size_t n) {
    return static_cast<size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

// Fisher-Yates with draws in a fixed order.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.index(i)]);
  }
}

}  // namespace textnorm
