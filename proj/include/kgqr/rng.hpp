#pragma once

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <vector>

namespace kgqr {

// SplitMix64 stream with order-independent splitting. A child stream derived
// with split(...) depends only on the parent's construction seed and the split
// keys, never on how many numbers the parent has drawn, so every sampling site
// can be keyed on (global seed, site keys) and reproduced in isolation.
// All bounded sampling avoids std::uniform_int_distribution on purpose: its
// output is implementation-defined, this generator is bit-stable everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection from a power-of-two mask.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = ~0ULL >> __builtin_clzll((n - 1) | 1);
    std::uint64_t x;
    do {
      x = next_u64() & mask;
    } while (x >= n);
    return x;
  }

  Rng split(std::uint64_t key) const { return Rng(mix(seed_, key)); }
  Rng split(std::uint64_t a, std::uint64_t b) const { return Rng(mix(mix(seed_, a), b)); }
  Rng split(std::string_view name) const { return Rng(mix(seed_, fnv1a(name))); }

  std::uint64_t seed() const { return seed_; }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  // k distinct indices from [0, n), k <= n, returned sorted.
  std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t k);

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

// Floyd's algorithm; O(k) draws regardless of n.
inline std::vector<std::uint64_t> Rng::sample_indices(std::uint64_t n, std::uint64_t k) {
  std::vector<std::uint64_t> out;
  if (k == 0 || n == 0) return out;
  if (k >= n) {
    out.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  out.reserve(k);
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uint64_t t = below(j + 1);
    bool seen = false;
    for (std::uint64_t v : out) {
      if (v == t) {
        seen = true;
        break;
      }
    }
    out.push_back(seen ? j : t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace kgqr
