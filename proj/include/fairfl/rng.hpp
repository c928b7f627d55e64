#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fairfl {

// Named deterministic random stream. The raw 64-bit sequence is a pure
// function of (seed, label) built from integer arithmetic only, so it is
// identical across platforms and runs. Derived real-valued draws go through
// fixed transforms (no std::*_distribution, whose output is
// implementation-defined).
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view label)
      : seed_(seed), label_(label), state_(derive_state(seed, label)) {}

  uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  // Child stream with an independent sequence; does not consume from this one.
  RngStream fork(std::string_view sublabel) const {
    std::string child = label_;
    child += '/';
    child += sublabel;
    return RngStream(seed_, child);
  }

  uint64_t next_u64() {
    // splitmix64
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1); never returns exactly 0.
  double next_open_uniform() {
    double u = next_uniform();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  // Unbiased integer in [0, n) by rejection.
  uint64_t next_below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Marsaglia polar; caches the paired draw.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_uniform() - 1.0;
      v = 2.0 * next_uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // Laplace(0, scale) by inverse CDF. scale == 0 yields exactly 0.
  double next_laplace(double scale) {
    if (scale == 0.0) return 0.0;
    const double u = next_open_uniform() - 0.5;
    const double mag = std::log(1.0 - 2.0 * std::fabs(u));
    return u < 0.0 ? scale * mag : -scale * mag;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  static uint64_t derive_state(uint64_t seed, std::string_view label) {
    uint64_t s = fnv1a(label) ^ (seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
    // two avalanche rounds so nearby (seed, label) pairs decorrelate
    for (int i = 0; i < 2; ++i) {
      s = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9ULL;
      s = (s ^ (s >> 27)) * 0x94D049BB133111EBULL;
      s ^= s >> 31;
    }
    return s;
  }

  uint64_t seed_;
  std::string label_;
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fairfl
