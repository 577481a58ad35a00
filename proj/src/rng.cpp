#include "igrl/rng.hpp"

#include <cmath>

namespace igrl {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double two_pi = 6.283185307179586476925286766559;
  const double angle = uniform01() * two_pi;
  const double radius = std::sqrt(-2.0 * std::log(1.0 - uniform01()));
  spare_ = std::sin(angle) * radius;
  has_spare_ = true;
  return std::cos(angle) * radius;
}

uint64_t Rng::hash_str(const char* s) {
  // FNV-1a 64.
  uint64_t h = 0xcbf29ce484222325ull;
  for (; *s; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace igrl
