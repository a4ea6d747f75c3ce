#pragma once

#include <cstdint>
#include <random>

namespace lnforge {

/// Seeded random source with platform-independent uniform and normal draws.
/// The standard distributions are implementation-defined, so sampling is done
/// here directly on top of the 64-bit Mersenne Twister.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for (seed, stream) pairs, e.g. (global seed, entry index).
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lnforge
