#pragma once

#include <cstdint>

#include "sngrc/config.hpp"
#include "sngrc/types.hpp"

namespace sngrc {

/// EEG-style channel matrix plus the preprocessed scalar series for the
/// selected channel: normalized to [-0.5, 0.5], then block-averaged by the
/// downsample factor (floor(raw/downsample) samples out).
struct EegSeries {
  Mat channels;  // rows = samples, cols = channels
  double rate = 256.0;
  int channel = 0;
  Vec processed;
  double delta_t = 0.0625;  // downsample / rate
  bool degenerate = false;  // constant channel
};

/// Affine map of a channel onto [-0.5, 0.5]; a constant channel maps to all
/// zeros (flagged by the caller via max == min).
Vec normalize_to_unit_interval(const Vec& raw);

/// Means of consecutive blocks; output length floor(n / block).
Vec block_average(const Vec& x, int block);

EegSeries preprocess_eeg(const Mat& channels, int channel, double rate, int downsample);

/// Table 1 coefficient estimates for the identified EEG SDE.
Eigen::Vector4d table1_theta1();
Eigen::Vector4d table1_theta2();

/// Scalar series from the identified SDE, Euler-Maruyama at dt, with a small
/// constant diffusion floor added to g^2. The floor keeps the simulation
/// excited: without it the band just above zero has clamped (zero) diffusion
/// and contracting drift, and trajectories lock up there within a few dozen
/// steps. The drift is untouched. After switch_at the diffusion is scaled by
/// seizure_gain to mimic the high-amplitude ictal regime.
struct SurrogateOptions {
  std::size_t n_samples = 1500;
  std::size_t switch_at = 600;   // >= n_samples disables the seizure regime
  double seizure_gain = 2.2;
  double diffusion_floor = 0.004;
  double x0 = -0.25;
  double dt = 0.0625;
  int upsample = 16;
};

Vec make_surrogate_latent(const SurrogateOptions& opts, std::uint64_t seed);

/// Raw multichannel CSV payload for the bundled surrogate: the latent series
/// upsampled (piecewise constant) to the raw rate, scaled to EEG-like
/// amplitudes, flanked by two independent decoy channels.
Mat make_surrogate_raw(const SurrogateOptions& opts, std::uint64_t seed);

SurrogateOptions surrogate_options_from_config(const EegFileConfig& eeg);

}  // namespace sngrc
