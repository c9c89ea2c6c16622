#include "sngrc/rng.hpp"

#include <cmath>

namespace sngrc::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline double to_unit_interval(std::uint64_t bits) {
  // 53 mantissa bits, shifted into (0, 1]; zero is excluded so log() is safe.
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    philox_round(counter, key);
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return counter;
}

double uniform01(std::uint64_t seed, std::uint32_t substream, std::uint64_t step) {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
      substream, 0u};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                            static_cast<std::uint32_t>(seed >> 32)};
  const auto out = philox4x32(ctr, key);
  const std::uint64_t bits =
      (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  return to_unit_interval(bits);
}

double standard_normal(std::uint64_t seed, std::uint32_t substream, std::uint64_t step) {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
      substream, 1u};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                            static_cast<std::uint32_t>(seed >> 32)};
  const auto out = philox4x32(ctr, key);
  const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  const double u1 = to_unit_interval(a);
  const double u2 = to_unit_interval(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return splitmix64(base ^ splitmix64(tag));
}

NoiseDraw make_noise_draw(std::uint64_t seed, std::size_t n_steps, int noise_dim) {
  NoiseDraw draw;
  draw.seed = seed;
  draw.stream.resize(static_cast<Eigen::Index>(n_steps), noise_dim);
  for (std::size_t i = 0; i < n_steps; ++i) {
    for (int j = 0; j < noise_dim; ++j) {
      draw.stream(static_cast<Eigen::Index>(i), j) =
          standard_normal(seed, kNoiseBase + static_cast<std::uint32_t>(j), i);
    }
  }
  return draw;
}

MomentCheck moment_check(const Mat& stream) {
  MomentCheck res;
  const double n = static_cast<double>(stream.size());
  if (n < 2) return res;
  res.mean = stream.mean();
  res.variance = (stream.array() - res.mean).square().sum() / (n - 1.0);
  res.ok = std::abs(res.mean) < 5.0 / std::sqrt(n) &&
           std::abs(res.variance - 1.0) < 5.0 * std::sqrt(2.0 / n);
  return res;
}

}  // namespace sngrc::rng
