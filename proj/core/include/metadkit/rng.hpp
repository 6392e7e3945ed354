#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metadkit {

// Versioned stream contract. A stream is identified by (seed, label,
// ordinal); its 64-bit engine seed is derived with SplitMix64 finalisers over
// the FNV-1a hash of the label, so streams never depend on evaluation order.
// Bounded integers use Lemire's multiply-shift rejection, which (unlike
// std::uniform_int_distribution) is identical across standard libraries.
inline constexpr std::string_view kRngContract = "mt19937_64+splitmix64-streams/v1";

std::uint64_t splitmix64_mix(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t stream_seed(std::uint64_t seed, std::string_view label, std::uint64_t ordinal);

class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::string_view label, std::uint64_t ordinal);

  // Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);

  // Uniform real in the open interval (0, 1), 53-bit resolution.
  double uniform_open();

 private:
  std::mt19937_64 engine_;
};

}  // namespace metadkit
