#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace pharl {

// All randomness in the pipeline flows from one config seed through named
// substreams, so that independent stages draw from independent streams and
// adding a draw in one place never shifts another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Substream keyed by (seed, name) or (seed, name, index). The index form
  // is used for per-epoch / per-item streams.
  static Rng substream(std::uint64_t seed, std::string_view name) {
    return Rng(mix(seed ^ fnv1a(name)));
  }
  static Rng substream(std::uint64_t seed, std::string_view name,
                       std::uint64_t index) {
    return Rng(mix(mix(seed ^ fnv1a(name)) + index));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; spare value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n). Rejection sampling keeps the result exactly
  // uniform and independent of the standard library's distribution details.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = eng_();
    while (x >= limit) x = eng_();
    return x % n;
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t raw() { return eng_(); }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  // splitmix64 finalizer, used to decorrelate nearby seeds.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pharl
