#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "fsl/errors.hpp"

namespace fsl {

namespace detail {

// SplitMix64 finalizer. Output at position n is mix(base + GAMMA * n), so the
// generator is a pure function of (identity, position) — no hidden state.
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

}  // namespace detail

// Counter-based deterministic random stream. The sequence is a pure function
// of (seed, stream_id): identical on every platform, and derived streams never
// perturb their parent. Copy freely — a copy replays from its current position.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t position = 0;

  static RngStream from_seed(std::uint64_t seed) { return RngStream{seed, 0, 0}; }

  std::uint64_t next_u64() {
    std::uint64_t base = detail::mix64(seed ^ detail::mix64(stream_id + detail::kGolden));
    return detail::mix64(base + detail::kGolden * ++position);
  }

  // Uniform on [0,1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., bound-1}, unbiased via rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) raise(errc::invalid_config, "next_below: zero bound");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double next_normal() {
    double u1 = 1.0 - next_double();  // (0,1], keeps log() finite
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

// Child stream for `tag`. A pure function of (seed, stream_id, tag): the chain
// hash is order-sensitive, so derive(derive(s,1),2) != derive(derive(s,2),1).
inline RngStream derive_stream(const RngStream& parent, std::uint64_t tag) {
  RngStream child;
  child.seed = parent.seed;
  child.stream_id = detail::mix64(parent.stream_id ^ detail::mix64(tag + detail::kGolden));
  child.position = 0;
  return child;
}

// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 is boosted through
// Gamma(shape+1) * U^(1/shape).
inline double sample_gamma(RngStream& rng, double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    raise(errc::invalid_config, "sample_gamma: shape must be positive");
  if (shape < 1.0) {
    double u = 1.0 - rng.next_double();  // (0,1]
    return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.next_normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = rng.next_double();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Symmetric Beta(alpha, alpha) via the two-Gamma construction.
inline double sample_beta(RngStream& rng, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    raise(errc::invalid_config, "sample_beta: alpha must be positive");
  double g1 = sample_gamma(rng, alpha);
  double g2 = sample_gamma(rng, alpha);
  double s = g1 + g2;
  if (s == 0.0) return 0.5;  // both underflowed; the symmetric choice
  return g1 / s;
}

// First k entries of a Fisher-Yates pass over {0..n-1}; k == n gives a full
// permutation.
inline std::vector<std::size_t> sample_indices(RngStream& rng, std::size_t n, std::size_t k) {
  if (k > n) raise(errc::invalid_config, "sample_indices: k > n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace fsl
