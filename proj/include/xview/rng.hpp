// Splittable counter-based random number generator.
//
// One master seed drives every stochastic operation in a run. Streams are
// derived by hashing a label path into the seed (child()), so consuming
// draws on one stream never shifts another. This is what makes runs
// reproducible and lets structurally different models share identical
// initialization for identically named parameters.
//
// The core generator is splitmix64 applied to an incrementing counter; the
// normal sampler is Box-Muller over raw 53-bit uniforms, so draws are
// bit-stable across platforms (no std::*_distribution involvement).

#ifndef XVIEW_RNG_HPP
#define XVIEW_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace xview {

namespace detail {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_label(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = seed ^ 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h = (h ^ c) * 0x100000001b3ULL;
  }
  return mix64(h);
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(detail::mix64(seed + detail::kGamma)) {}

  // Derived stream; independent of any draws made on *this.
  Rng child(std::string_view label) const { return Rng(detail::hash_label(seed_, label), 0); }
  Rng child(std::uint64_t index) const {
    return Rng(detail::mix64(seed_ ^ (index + 1) * detail::kGamma), 0);
  }

  std::uint64_t next_u64() { return detail::mix64(seed_ + (++counter_) * detail::kGamma); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Exclusive upper bound; n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  double normal() {
    // Box-Muller; the log argument is kept strictly positive.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  std::vector<double> normal_vec(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = normal();
    return out;
  }

 private:
  Rng(std::uint64_t raw_seed, int) : seed_(raw_seed) {}

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace xview

#endif  // XVIEW_RNG_HPP
