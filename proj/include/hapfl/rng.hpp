#pragma once

// Deterministic random streams. mt19937_64 output is pinned by the standard,
// but the distribution adapters in <random> are not, so the uniform/normal
// transforms are spelled out here. Substreams are derived by mixing a base
// seed with stream tags (splitmix64), which lets independent parts of a run
// (round r, client k, ...) draw without sharing state or caring about order.

#include <cmath>
#include <cstdint>
#include <random>

namespace hapfl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(seed ^ (a * 0x9e3779b97f4a7c15ULL)) ^ b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t sub = 0) {
    return Rng(mix_seed(seed, tag, sub));
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1], safe as a log argument
  double uniform_pos() { return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; burns two words per draw, no cached spare (keeps replay trivial)
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // index in [0, n)
  std::uint64_t index(std::uint64_t n) { return eng_() % n; }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace hapfl
