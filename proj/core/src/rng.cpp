#include "metashift/rng.hpp"

#include <cmath>
#include <sstream>

namespace metashift {

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::load_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw std::runtime_error("rng: malformed engine state");
}

Rng Rng::child(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 mix of (seed, stream) to decorrelate child streams.
  std::uint64_t x = seed + 0x9E3779B97f4A7C15ULL * (stream + 1);
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return Rng(mix(mix(x)));
}

}  // namespace metashift
