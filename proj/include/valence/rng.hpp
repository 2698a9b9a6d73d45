#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace valence {

/// Deterministic random stream. Wraps std::mt19937_64 (whose output sequence
/// is fixed by the standard) and derives all floating-point draws from raw
/// 64-bit words, so the same seed produces the same values on every
/// implementation. std::*_distribution is never used for that reason.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller; generates draws in pairs.
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent seed from a root seed, a component label and an
/// index. Adding a new consumer therefore never perturbs the draws of an
/// existing one.
std::uint64_t derive_seed(std::uint64_t root, std::string_view component,
                          std::uint64_t index = 0);

inline Rng substream(std::uint64_t root, std::string_view component,
                     std::uint64_t index = 0) {
  return Rng(derive_seed(root, component, index));
}

}  // namespace valence
