#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

namespace lookdown {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent stream per (master seed, replica index).
inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ splitmix64(stream);
  std::array<std::uint32_t, 8> words{};
  for (auto& w : words) w = static_cast<std::uint32_t>(splitmix64(s) >> 32);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Uniform on the open interval (0,1).
inline double uniform01(Rng& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential(Rng& g, double rate) { return -std::log(uniform01(g)) / rate; }

inline bool bernoulli(Rng& g, double p) { return uniform01(g) < p; }

// Uniform integer in [lo, hi].
inline long uniform_int(Rng& g, long lo, long hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Lemire's nearly divisionless method.
  unsigned __int128 m = static_cast<unsigned __int128>(g()) * span;
  auto low = static_cast<std::uint64_t>(m);
  if (low < span) {
    const std::uint64_t threshold = (0 - span) % span;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(g()) * span;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return lo + static_cast<long>(m >> 64);
}

inline double normal(Rng& g) {
  // Marsaglia polar method, one value per call to keep streams simple.
  for (;;) {
    const double u = 2.0 * uniform01(g) - 1.0;
    const double v = 2.0 * uniform01(g) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

inline double gamma_draw(Rng& g, double shape) {
  if (shape < 1.0) {
    const double u = uniform01(g);
    return gamma_draw(g, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(g);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(g);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline double beta_draw(Rng& g, double a, double b) {
  const double x = gamma_draw(g, a);
  const double y = gamma_draw(g, b);
  return x / (x + y);
}

inline long poisson_draw(Rng& g, double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    long k = 0;
    double p = uniform01(g);
    while (p > limit) {
      ++k;
      p *= uniform01(g);
    }
    return k;
  }
  std::poisson_distribution<long> d(mean);
  return d(g);
}

// Binomial by inversion for small n, else std (deterministic per platform).
inline long binomial_draw(Rng& g, long n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  if (n < 64) {
    long k = 0;
    for (long i = 0; i < n; ++i) k += bernoulli(g, p);
    return k;
  }
  std::binomial_distribution<long> d(n, p);
  return d(g);
}

}  // namespace lookdown
