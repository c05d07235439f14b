#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace metashift {

/// Deterministic random source. Doubles and normals are derived from raw
/// 64-bit draws by hand (no std distributions), so identical seeds give
/// identical streams on any platform, and the engine state serializes exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Standard normal via Box-Muller; consumes two draws, keeps no cache.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform index in [0, n) without modulo bias (Lemire reduction).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  /// First k entries of a partial Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::string save_state() const;
  void load_state(const std::string& state);

  /// Independent child stream for a (seed, stream) pair; used for evaluation
  /// so validation never perturbs the training stream.
  static Rng child(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace metashift
