#pragma once

#include <cstdint>
#include <random>

#include "sfda/numeric.hpp"

namespace sfda {

namespace detail {

// SplitMix64 finalizer; used to turn structured stream keys into seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace detail

// Stream tags keep substreams for different purposes disjoint even when the
// remaining key components collide.
enum class StreamTag : std::uint64_t {
  BootstrapWeights = 0x01,
  DataGeneration   = 0x02,
  McRun            = 0x03,
  Sparsify         = 0x04,
  General          = 0x05,
};

/// Derives a child seed from (seed, tag, index); used to give every Monte
/// Carlo run its own seed space.
inline std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag,
                                 std::uint64_t index) {
  std::uint64_t k = detail::mix64(seed);
  k = detail::mix64(k ^ static_cast<std::uint64_t>(tag));
  return detail::mix64(k ^ index);
}

/// Deterministic random stream. Substreams are derived from a (seed, tag,
/// indices) key, so replicates / runs / groups can be generated independently
/// and in any order while reproducing the sequential results bit for bit.
class RngStream {
public:
  explicit RngStream(std::uint64_t key) : engine_(key) {}

  static RngStream substream(std::uint64_t seed, StreamTag tag,
                             std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t k = detail::mix64(seed);
    k = detail::mix64(k ^ static_cast<std::uint64_t>(tag));
    k = detail::mix64(k ^ a);
    k = detail::mix64(k ^ b);
    return RngStream(k);
  }

  /// Uniform on the open interval (0,1); never returns an exact 0 or 1.
  double uniform() {
    const std::uint64_t x = engine_();
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer on {lo, ..., hi} inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  /// Standard normal via the inverse CDF; exact distribution, one draw per call.
  double normal() { return normal_quantile(uniform()); }

private:
  std::mt19937_64 engine_;
};

} // namespace sfda
