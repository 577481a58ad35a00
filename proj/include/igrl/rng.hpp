#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace igrl {

// Deterministic splitmix64 generator. All randomness in the project flows
// through this class so that runs are reproducible independent of the
// platform's standard-library distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Avoid the short all-zero warmup of splitmix.
    next_u64();
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  int uniform_int(int n) {
    const auto x = next_u64();
    return static_cast<int>((static_cast<__uint128_t>(x) * static_cast<uint64_t>(n)) >> 64);
  }

  // Box-Muller with a cached spare draw.
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Hash-combine for deriving child seeds from a parent seed plus labels.
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t hash_str(const char* s);

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace igrl
