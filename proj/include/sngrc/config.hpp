#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sngrc/controller.hpp"
#include "sngrc/features.hpp"
#include "sngrc/sde.hpp"

namespace sngrc {

struct SystemConfig {
  std::string kind = "vdp_additive";  // vdp_additive | vdp_multiplicative | polynomial
  double eps = 1.0;
  double sigma1 = 0.1;
  double sigma2 = 0.1;
  std::vector<double> theta1 = {0.0, 0.0, 0.0, 0.0};
  std::vector<double> theta2 = {0.0, 0.0, 0.0, 0.0};
  double poly_x_lo = -0.5;
  double poly_x_hi = 0.5;
  double clamp_budget = 0.01;
};

struct GridConfig {
  double dt = 0.01;
  std::size_t steps = 2000;
  std::size_t transient = 500;
  double blowup_bound = 1e6;
};

struct FeaturesFileConfig {
  int delay = 1;
  std::vector<int> poly_degrees = {2, 3};
  bool include_constant = true;
  bool include_noise_features = true;
};

struct ControllerConfig {
  double k_diag = 0.5;
  std::vector<std::pair<std::size_t, double>> events = {{0, 1.2}, {700, 0.8}, {1100, 0.5}};
  double trigger_threshold = 0.2;
  std::string noise_policy = "zero";  // zero | oracle | residual
};

struct TrainingConfig {
  double perturb_amplitude = 1.0;
  std::size_t perturb_hold = 5;
  double alpha_lo = 1e-10;
  double alpha_hi = 10.0;
  int alpha_count = 45;
  double holdout_fraction = 1.0 / 3.0;
};

struct SweepConfig {
  std::vector<double> sigmas = {0.5, 1.0, 1.5, 2.0};
  std::vector<double> epss = {1.0, 0.5, 0.1};
  double sigma2_ratio = 2.0;  // (sigma1, sigma2) = (sigma, ratio * sigma)
};

struct EegFileConfig {
  std::string input = "bundled:surrogate";
  int channel = 1;
  double rate = 256.0;
  int downsample = 16;
  double lambda_lo = 1e-6;
  double lambda_hi = 1.0;
  int lambda_count = 31;
  int kfolds = 5;
  // bundled surrogate generator
  std::size_t surrogate_samples = 1500;
  std::size_t surrogate_switch = 600;
  double surrogate_gain = 2.2;
  double surrogate_floor = 0.004;
  double surrogate_x0 = -0.25;
  // three-phase pipeline layout (sample indices in the processed series)
  std::size_t phase_a_steps = 800;
  std::size_t phase_a_discard = 100;
  std::size_t phase_b_steps = 200;
  std::size_t phase_c_steps = 100;
  std::size_t original_start = 900;  // start of the uncontrolled seizure segment
  double perturb_amplitude = 2.0;
  std::size_t perturb_hold = 5;
};

struct ExperimentConfig {
  SystemConfig system;
  GridConfig grid;
  FeaturesFileConfig features;
  ControllerConfig controller;
  TrainingConfig training;
  SweepConfig sweep;
  EegFileConfig eeg;
  std::uint64_t seed = 20240617;
  int repeats = 5;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Defaults overlaid with the file's contents (JSON merge patch), so presets
/// only state what they change.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical dump of the fully resolved config (sorted keys, 2-space indent).
std::string resolved_config_dump(const ExperimentConfig& cfg);

/// FNV-1a 64-bit hash of the canonical dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Derived pieces used throughout the pipeline.
SdeSystem system_from_config(const SystemConfig& sys);
FeatureConfig feature_config(const ExperimentConfig& cfg, bool include_noise_features);
NoisePolicy noise_policy_from_string(const std::string& name);
std::vector<double> alpha_grid_from_config(const TrainingConfig& t);
std::vector<double> lambda_grid_from_config(const EegFileConfig& e);

/// Reported values from the source experiments, embedded in summaries as
/// reference metadata (never asserted).
nlohmann::json reference_metadata(const std::string& experiment);

}  // namespace sngrc
