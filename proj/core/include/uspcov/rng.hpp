#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "uspcov/errors.hpp"

namespace uspcov {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Derives a child seed from a parent seed and a path of indices, so that a
/// cell, a simulation, or any other unit of work owns a seed that is a pure
/// function of (parent, path) regardless of execution order.
inline std::uint64_t derive_seed(std::uint64_t parent,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = parent;
  detail::splitmix64(state);
  for (std::uint64_t v : path) {
    state ^= detail::rotl64(v + 0x9E3779B97F4A7C15ULL, 31);
    detail::splitmix64(state);
  }
  return detail::splitmix64(state);
}

/// Seedable pseudo-random stream (xoshiro256++ state built from a splitmix64
/// chain over the seed and stream id).
///
/// Contract: the same (seed, stream_id) always reproduces the same draw
/// sequence, and distinct stream_ids give independent streams, so parallel
/// consumers can each own stream_id = task index and results do not depend
/// on scheduling. All higher-level samplers consume draws only through a
/// stream passed in by the caller; there is no global generator.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {
    std::uint64_t a = seed;
    std::uint64_t b = stream_id ^ 0x6A09E667F3BCC909ULL;
    std::uint64_t state =
        detail::splitmix64(a) ^ detail::rotl64(detail::splitmix64(b), 32);
    for (auto& w : s_) w = detail::splitmix64(state);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl64(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl64(s_[3], 45);
    return result;
  }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal draw (Marsaglia polar method; the spare deviate is
  /// cached inside the stream).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  /// Gamma(shape, 1) draw, Marsaglia-Tsang squeeze method.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      double u;
      do {
        u = uniform();
      } while (u == 0.0);
      return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

 private:
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace uspcov
