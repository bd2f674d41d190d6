#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cohnet {

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a seed with a stream id into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Platform-reproducible random source. The engine is std::mt19937_64 (fully
/// specified by the standard); the distributions below are written out so
/// that every platform consumes engine outputs in the same order.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(derive_seed(seed, stream)) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal();

  /// Circular complex Gaussian with unit variance per real dimension.
  std::complex<double> complex_normal();

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cohnet
