#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace duoguard {

/// Seeded generator with platform-independent draws.
///
/// Every random quantity in the project flows from one root seed through
/// named substreams, so a run is reproducible from `(root_seed, stream)`.
/// Draws are built directly from the 64-bit engine output rather than
/// std distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from a root seed and a name.
  static Rng substream(std::uint64_t root_seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn with probability proportional to `weights` (non-negative, positive sum).
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive seeds and stateless coin flips.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over bytes, finalized with mix64.
std::uint64_t hash_string(std::string_view s);

}  // namespace duoguard
