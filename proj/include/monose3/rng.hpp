#pragma once

#include <cstdint>
#include <random>

namespace monose3 {

using Rng = std::mt19937_64;

// Independent streams are keyed by (seed, purpose, index) so that scenario
// fan-out produces the same draws whatever the thread count.
enum class Stream : std::uint64_t {
  Scenario = 1,
  Diffusion = 2,
  Denoiser = 3,
  Timestep = 4,
  Init = 5,
  Observation = 6,
};

std::uint64_t mix_seed(std::uint64_t seed, Stream stream, std::uint64_t index);

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Rng(mix_seed(seed, stream, index));
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace monose3
