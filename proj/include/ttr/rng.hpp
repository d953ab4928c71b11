#pragma once

#include <cstdint>
#include <random>

namespace ttr {

/// Seed mixing for independent per-replicate streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// Deterministic random source.  All distribution transforms are written out
/// explicitly (instead of the std:: distribution classes) so that a fixed
/// seed gives the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform on (0, 1), never returning exactly 0 or 1.
  double uniform01();

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n);

  /// Standard normal via Box-Muller with a cached spare.
  double normal();

  /// Gamma(shape, scale) via Marsaglia-Tsang squeeze.
  double gamma(double shape, double scale);

  /// Chi-square with (possibly non-integer) degrees of freedom nu > 0.
  double chi_square(double nu) { return gamma(0.5 * nu, 2.0); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ttr
