#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lsbd/errors.hpp"

namespace lsbd {

// Deterministic random source. mt19937_64 output is pinned by the C++
// standard, but the standard *distributions* are not, so every draw here is
// built from raw generator words. Same seed => same stream on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1): top 53 bits of one word.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [0, 2*pi).
  double uniform_angle() { return 2.0 * kPi * uniform01(); }

  // Standard normal via Box-Muller; draws two words per pair, caches the spare.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]: keeps log() finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw InvalidInput("below(0) is empty");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates, descending index.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lsbd
