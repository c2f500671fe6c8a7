#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace survkit {

using Rng = std::mt19937_64;

// Reproducible substream: the same (seed, tags...) yields the same generator
// regardless of thread count or call order. Work items draw from their own
// substream, never from a shared one.
inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c),
                    static_cast<std::uint32_t>(c >> 32)};
  return Rng(seq);
}

inline double sample_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double sample_normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

// Standard normal truncated to [lo, inf). Naive rejection when the bound sits
// low enough to accept quickly, otherwise Robert's exponential rejection,
// which stays exact for bounds far in the tail.
inline double sample_std_normal_lower(Rng& rng, double lo) {
  std::normal_distribution<double> norm(0.0, 1.0);
  if (lo <= 0.2) {
    for (;;) {
      double x = norm(rng);
      if (x >= lo) return x;
    }
  }
  const double lambda = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  std::exponential_distribution<double> expo(lambda);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    double x = lo + expo(rng);
    double d = x - lambda;
    if (unif(rng) <= std::exp(-0.5 * d * d)) return x;
  }
}

inline double sample_trunc_normal_lower(Rng& rng, double mean, double sd, double lo) {
  return mean + sd * sample_std_normal_lower(rng, (lo - mean) / sd);
}

inline double sample_trunc_normal_upper(Rng& rng, double mean, double sd, double hi) {
  return mean - sd * sample_std_normal_lower(rng, (mean - hi) / sd);
}

}  // namespace survkit
