#pragma once

#include <cstdint>
#include <vector>

namespace dret {

// splitmix64: tiny, fast, and its output is pinned by the algorithm rather
// than by the standard library, so seeded artifacts are byte-stable across
// platforms and toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound). Rejection-free modulo bias is < 2^-40 for the
  // bounds used here (all well under 2^24).
  std::size_t below(std::size_t bound) { return static_cast<std::size_t>(next() % bound); }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform double in [-s, s].
  double symmetric(double s = 1.0) { return (2.0 * uniform() - 1.0) * s; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace dret
