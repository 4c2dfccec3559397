#pragma once

#include <array>
#include <cstdint>

namespace polmc {

/// Counter-based uniform stream keyed by (seed, photon_index).
///
/// Philox4x32-10: the key is the seed, the upper counter words are the stream
/// index, the lower words count draws. Any (seed, index) pair can be
/// reconstructed without replaying other streams, which makes results
/// independent of how photons are scheduled across workers.
class RandomStream {
public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_index);

  /// Uniform double on the half-open interval (0, 1].
  double uniform();

  /// Uniform double on [0, 1).
  double uniform_closed_open() { return 1.0 - uniform(); }

  std::uint64_t next_u64();

private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

inline RandomStream rng_stream(std::uint64_t seed, std::uint64_t photon_index) {
  return RandomStream(seed, photon_index);
}

/// SplitMix64 finaliser; derives sub-seeds from a seed and a tag.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

} // namespace polmc
