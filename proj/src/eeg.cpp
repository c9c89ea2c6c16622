#include "sngrc/eeg.hpp"

#include <cmath>
#include <stdexcept>

#include "sngrc/rng.hpp"

namespace sngrc {

Vec normalize_to_unit_interval(const Vec& raw) {
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (hi == lo) return Vec::Zero(raw.size());
  return ((raw.array() - lo) / (hi - lo) - 0.5).matrix();
}

Vec block_average(const Vec& x, int block) {
  if (block < 1) throw std::invalid_argument("block_average: block must be >= 1");
  const Eigen::Index out_len = x.size() / block;
  Vec out(out_len);
  for (Eigen::Index i = 0; i < out_len; ++i) {
    out[i] = x.segment(i * block, block).mean();
  }
  return out;
}

EegSeries preprocess_eeg(const Mat& channels, int channel, double rate, int downsample) {
  if (channel < 0 || channel >= channels.cols()) {
    throw std::invalid_argument("preprocess_eeg: channel index out of range");
  }
  EegSeries s;
  s.channels = channels;
  s.rate = rate;
  s.channel = channel;
  const Vec raw = channels.col(channel);
  s.degenerate = raw.maxCoeff() == raw.minCoeff();
  s.processed = block_average(normalize_to_unit_interval(raw), downsample);
  s.delta_t = static_cast<double>(downsample) / rate;
  return s;
}

Eigen::Vector4d table1_theta1() { return {0.0, -5.8878, 0.0, 0.0}; }
Eigen::Vector4d table1_theta2() { return {0.0, -0.1150, 4.0277, 0.0375}; }

Vec make_surrogate_latent(const SurrogateOptions& opts, std::uint64_t seed) {
  const Eigen::Vector4d t1 = table1_theta1();
  const Eigen::Vector4d t2 = table1_theta2();
  const double sqrt_dt = std::sqrt(opts.dt);
  Vec series(static_cast<Eigen::Index>(opts.n_samples));
  double x = opts.x0;
  for (std::size_t i = 0; i < opts.n_samples; ++i) {
    series[static_cast<Eigen::Index>(i)] = x;
    const double drift = t1[0] + x * (t1[1] + x * (t1[2] + x * t1[3]));
    const double g2 = t2[0] + x * (t2[1] + x * (t2[2] + x * t2[3]));
    const double gain = i >= opts.switch_at ? opts.seizure_gain : 1.0;
    const double g = gain * std::sqrt(std::max(0.0, g2) + opts.diffusion_floor);
    const double xi = rng::standard_normal(seed, rng::kNoiseBase, i);
    x = x + drift * opts.dt + g * sqrt_dt * xi;
  }
  return series;
}

Mat make_surrogate_raw(const SurrogateOptions& opts, std::uint64_t seed) {
  const Vec main = make_surrogate_latent(opts, seed);
  SurrogateOptions decoy = opts;
  decoy.switch_at = opts.n_samples;  // decoys stay in the resting regime
  const Vec left = make_surrogate_latent(decoy, rng::derive_seed(seed, 101));
  const Vec right = make_surrogate_latent(decoy, rng::derive_seed(seed, 202));

  const Eigen::Index rows = main.size() * opts.upsample;
  Mat raw(rows, 3);
  constexpr double kAmplitudeScale = 150.0;  // microvolt-ish raw amplitudes
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index s = i / opts.upsample;
    raw(i, 0) = kAmplitudeScale * left[s];
    raw(i, 1) = kAmplitudeScale * main[s];
    raw(i, 2) = kAmplitudeScale * right[s];
  }
  return raw;
}

SurrogateOptions surrogate_options_from_config(const EegFileConfig& eeg) {
  SurrogateOptions opts;
  opts.n_samples = eeg.surrogate_samples;
  opts.switch_at = eeg.surrogate_switch;
  opts.seizure_gain = eeg.surrogate_gain;
  opts.diffusion_floor = eeg.surrogate_floor;
  opts.x0 = eeg.surrogate_x0;
  opts.dt = static_cast<double>(eeg.downsample) / eeg.rate;
  opts.upsample = eeg.downsample;
  return opts;
}

}  // namespace sngrc
