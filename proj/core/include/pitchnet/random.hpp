#pragma once

#include <cstdint>
#include <random>

namespace pitchnet {

/// Seeded generator whose derived draws are identical on every platform.
/// The standard distributions are implementation-defined, so uniform and
/// normal variates are built directly from the 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; derives independent per-item seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

} // namespace pitchnet
