#pragma once

#include <array>
#include <cstdint>

#include "sngrc/types.hpp"

namespace sngrc::rng {

// Counter-based random numbers (Philox4x32-10, Salmon et al. 2011).
//
// Every sample is a pure function of (seed, substream, step): the key is the
// 64-bit seed, the counter packs the substream id and the step index. This
// gives bit-reproducible streams independent of evaluation order, so
// trajectories can be replayed exactly and sweep cells can run concurrently
// while each owns its seed.
//
// Substream layout (one substream per noise dimension, per the convention
// used throughout the library):
//   kNoiseBase   + j : Gaussian noise for state/noise dimension j
//   kPerturbBase + j : perturbation-signal draws for input dimension j
//   kInitBase    + j : initial-condition draws for state dimension j
//   kModelNoise      : synthetic increments for model-plant closure runs

constexpr std::uint32_t kNoiseBase = 0;
constexpr std::uint32_t kPerturbBase = 1u << 16;
constexpr std::uint32_t kInitBase = 2u << 16;
constexpr std::uint32_t kModelNoise = 3u << 16;

/// One Philox4x32-10 block: four 32-bit words from a 128-bit counter and a
/// 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Uniform double in (0, 1], bit-determined by (seed, substream, step).
double uniform01(std::uint64_t seed, std::uint32_t substream, std::uint64_t step);

/// Standard normal deviate via Box-Muller on one Philox block.
double standard_normal(std::uint64_t seed, std::uint32_t substream, std::uint64_t step);

/// Derives an independent child seed (splitmix64 of seed xor tag).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

/// i.i.d. standard Gaussian stream, rows = steps, cols = noise dimensions.
struct NoiseDraw {
  std::uint64_t seed = 0;
  Mat stream;  // n_steps x noise_dim
};

NoiseDraw make_noise_draw(std::uint64_t seed, std::size_t n_steps, int noise_dim);

/// Moment sanity check used in test mode: |mean| < 5/sqrt(N) and
/// |var - 1| < 5*sqrt(2/N) over the flattened stream.
struct MomentCheck {
  double mean = 0.0;
  double variance = 0.0;
  bool ok = false;
};

MomentCheck moment_check(const Mat& stream);

}  // namespace sngrc::rng
