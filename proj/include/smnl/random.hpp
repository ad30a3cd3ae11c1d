#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace smnl {

using Rng = std::mt19937_64;

// Deterministic stream derived from a base seed and any number of stream
// tags (replication index, purpose, ...).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t tag : tags) {
    words.push_back(static_cast<std::uint32_t>(tag));
    words.push_back(static_cast<std::uint32_t>(tag >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Uniform double in [0, 1) from the top 53 bits. Used instead of
// std::uniform_real_distribution so streams are identical across standard
// libraries.
template <std::uniform_random_bit_generator G>
double uniform01(G& gen) {
  static_assert(G::max() - G::min() == ~std::uint64_t{0}, "expects a 64-bit generator");
  return static_cast<double>((gen() - G::min()) >> 11) * 0x1.0p-53;
}

template <std::uniform_random_bit_generator G>
double uniform(G& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

}  // namespace smnl
