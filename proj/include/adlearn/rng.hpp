#pragma once

// Deterministic keyed random streams. A stream is addressed by a composite
// key (seed, draw, advertiser, site, week, purpose, ...), so the same key
// yields the same values regardless of evaluation order or thread schedule.
// That is what makes paired baseline/counterfactual shocks bit-identical.

#include <cstdint>
#include <initializer_list>

#include "adlearn/stats.hpp"

namespace adlearn {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed) : state_(seed) { (void)splitmix64(state_); }

  KeyedRng(std::initializer_list<std::uint64_t> key) : state_(0x853C49E6748FEA9BULL) {
    for (std::uint64_t k : key) {
      state_ ^= k + 0x9E3779B97F4A7C15ULL + (state_ << 6) + (state_ >> 2);
      (void)splitmix64(state_);
    }
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in the open interval (0,1): safe input for inverse CDFs.
  double next_u01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() { return norm_quantile(next_u01()); }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t state_;
};

// Sample Z ~ N(0,1) conditioned on lo < Z < hi (extended-real bounds).
// Inverse-CDF in the appropriate tail representation; one-sided extreme
// tails fall back to Robert's exponential rejection sampler.
double truncated_std_normal(double lo, double hi, KeyedRng& rng);

// N(0, sigma^2) truncated to (lo, hi).
inline double truncated_normal(double lo, double hi, double sigma, KeyedRng& rng) {
  return sigma * truncated_std_normal(lo == -kInf ? -kInf : lo / sigma,
                                      hi == kInf ? kInf : hi / sigma, rng);
}

}  // namespace adlearn
