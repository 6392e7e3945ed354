#include "metadkit/rng.hpp"

namespace metadkit {

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

std::uint64_t splitmix64_mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view label, std::uint64_t ordinal) {
  std::uint64_t s = splitmix64_mix(seed);
  s = splitmix64_mix(s ^ fnv1a64(label));
  return splitmix64_mix(s ^ splitmix64_mix(ordinal));
}

StreamRng::StreamRng(std::uint64_t seed, std::string_view label, std::uint64_t ordinal)
    : engine_(stream_seed(seed, label, ordinal)) {}

std::uint64_t StreamRng::below(std::uint64_t bound) {
  u128 m = static_cast<u128>(engine_()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<u128>(engine_()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double StreamRng::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace metadkit
