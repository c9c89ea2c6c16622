#include "sngrc/config.hpp"

#include <cmath>
#include <fstream>

namespace sngrc {

using nlohmann::json;

namespace {

json system_to_json(const SystemConfig& s) {
  return json{{"kind", s.kind},        {"eps", s.eps},
              {"sigma1", s.sigma1},    {"sigma2", s.sigma2},
              {"theta1", s.theta1},    {"theta2", s.theta2},
              {"poly_x_lo", s.poly_x_lo}, {"poly_x_hi", s.poly_x_hi},
              {"clamp_budget", s.clamp_budget}};
}

json grid_to_json(const GridConfig& g) {
  return json{{"dt", g.dt},
              {"steps", g.steps},
              {"transient", g.transient},
              {"blowup_bound", g.blowup_bound}};
}

json features_to_json(const FeaturesFileConfig& f) {
  return json{{"delay", f.delay},
              {"poly_degrees", f.poly_degrees},
              {"include_constant", f.include_constant},
              {"include_noise_features", f.include_noise_features}};
}

json controller_to_json(const ControllerConfig& c) {
  json events = json::array();
  for (const auto& [step, factor] : c.events) events.push_back(json::array({step, factor}));
  return json{{"k_diag", c.k_diag},
              {"events", events},
              {"trigger_threshold", c.trigger_threshold},
              {"noise_policy", c.noise_policy}};
}

json training_to_json(const TrainingConfig& t) {
  return json{{"perturb_amplitude", t.perturb_amplitude},
              {"perturb_hold", t.perturb_hold},
              {"alpha_lo", t.alpha_lo},
              {"alpha_hi", t.alpha_hi},
              {"alpha_count", t.alpha_count},
              {"holdout_fraction", t.holdout_fraction}};
}

json sweep_to_json(const SweepConfig& s) {
  return json{{"sigmas", s.sigmas}, {"epss", s.epss}, {"sigma2_ratio", s.sigma2_ratio}};
}

json eeg_to_json(const EegFileConfig& e) {
  return json{{"input", e.input},
              {"channel", e.channel},
              {"rate", e.rate},
              {"downsample", e.downsample},
              {"lambda_lo", e.lambda_lo},
              {"lambda_hi", e.lambda_hi},
              {"lambda_count", e.lambda_count},
              {"kfolds", e.kfolds},
              {"surrogate_samples", e.surrogate_samples},
              {"surrogate_switch", e.surrogate_switch},
              {"surrogate_gain", e.surrogate_gain},
              {"surrogate_floor", e.surrogate_floor},
              {"surrogate_x0", e.surrogate_x0},
              {"phase_a_steps", e.phase_a_steps},
              {"phase_a_discard", e.phase_a_discard},
              {"phase_b_steps", e.phase_b_steps},
              {"phase_c_steps", e.phase_c_steps},
              {"original_start", e.original_start},
              {"perturb_amplitude", e.perturb_amplitude},
              {"perturb_hold", e.perturb_hold}};
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  return json{{"system", system_to_json(cfg.system)},
              {"grid", grid_to_json(cfg.grid)},
              {"features", features_to_json(cfg.features)},
              {"controller", controller_to_json(cfg.controller)},
              {"training", training_to_json(cfg.training)},
              {"sweep", sweep_to_json(cfg.sweep)},
              {"eeg", eeg_to_json(cfg.eeg)},
              {"seed", cfg.seed},
              {"repeats", cfg.repeats}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  const json& s = j.at("system");
  cfg.system.kind = s.at("kind").get<std::string>();
  cfg.system.eps = s.at("eps").get<double>();
  cfg.system.sigma1 = s.at("sigma1").get<double>();
  cfg.system.sigma2 = s.at("sigma2").get<double>();
  cfg.system.theta1 = s.at("theta1").get<std::vector<double>>();
  cfg.system.theta2 = s.at("theta2").get<std::vector<double>>();
  cfg.system.poly_x_lo = s.at("poly_x_lo").get<double>();
  cfg.system.poly_x_hi = s.at("poly_x_hi").get<double>();
  cfg.system.clamp_budget = s.at("clamp_budget").get<double>();

  const json& g = j.at("grid");
  cfg.grid.dt = g.at("dt").get<double>();
  cfg.grid.steps = g.at("steps").get<std::size_t>();
  cfg.grid.transient = g.at("transient").get<std::size_t>();
  cfg.grid.blowup_bound = g.at("blowup_bound").get<double>();

  const json& f = j.at("features");
  cfg.features.delay = f.at("delay").get<int>();
  cfg.features.poly_degrees = f.at("poly_degrees").get<std::vector<int>>();
  cfg.features.include_constant = f.at("include_constant").get<bool>();
  cfg.features.include_noise_features = f.at("include_noise_features").get<bool>();

  const json& c = j.at("controller");
  cfg.controller.k_diag = c.at("k_diag").get<double>();
  cfg.controller.events.clear();
  for (const auto& ev : c.at("events")) {
    cfg.controller.events.emplace_back(ev.at(0).get<std::size_t>(), ev.at(1).get<double>());
  }
  cfg.controller.trigger_threshold = c.at("trigger_threshold").get<double>();
  cfg.controller.noise_policy = c.at("noise_policy").get<std::string>();

  const json& t = j.at("training");
  cfg.training.perturb_amplitude = t.at("perturb_amplitude").get<double>();
  cfg.training.perturb_hold = t.at("perturb_hold").get<std::size_t>();
  cfg.training.alpha_lo = t.at("alpha_lo").get<double>();
  cfg.training.alpha_hi = t.at("alpha_hi").get<double>();
  cfg.training.alpha_count = t.at("alpha_count").get<int>();
  cfg.training.holdout_fraction = t.at("holdout_fraction").get<double>();

  const json& sw = j.at("sweep");
  cfg.sweep.sigmas = sw.at("sigmas").get<std::vector<double>>();
  cfg.sweep.epss = sw.at("epss").get<std::vector<double>>();
  cfg.sweep.sigma2_ratio = sw.at("sigma2_ratio").get<double>();

  const json& e = j.at("eeg");
  cfg.eeg.input = e.at("input").get<std::string>();
  cfg.eeg.channel = e.at("channel").get<int>();
  cfg.eeg.rate = e.at("rate").get<double>();
  cfg.eeg.downsample = e.at("downsample").get<int>();
  cfg.eeg.lambda_lo = e.at("lambda_lo").get<double>();
  cfg.eeg.lambda_hi = e.at("lambda_hi").get<double>();
  cfg.eeg.lambda_count = e.at("lambda_count").get<int>();
  cfg.eeg.kfolds = e.at("kfolds").get<int>();
  cfg.eeg.surrogate_samples = e.at("surrogate_samples").get<std::size_t>();
  cfg.eeg.surrogate_switch = e.at("surrogate_switch").get<std::size_t>();
  cfg.eeg.surrogate_gain = e.at("surrogate_gain").get<double>();
  cfg.eeg.surrogate_floor = e.at("surrogate_floor").get<double>();
  cfg.eeg.surrogate_x0 = e.at("surrogate_x0").get<double>();
  cfg.eeg.phase_a_steps = e.at("phase_a_steps").get<std::size_t>();
  cfg.eeg.phase_a_discard = e.at("phase_a_discard").get<std::size_t>();
  cfg.eeg.phase_b_steps = e.at("phase_b_steps").get<std::size_t>();
  cfg.eeg.phase_c_steps = e.at("phase_c_steps").get<std::size_t>();
  cfg.eeg.original_start = e.at("original_start").get<std::size_t>();
  cfg.eeg.perturb_amplitude = e.at("perturb_amplitude").get<double>();
  cfg.eeg.perturb_hold = e.at("perturb_hold").get<std::size_t>();

  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.repeats = j.at("repeats").get<int>();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  json overlay = json::parse(in);
  json base = to_json(ExperimentConfig{});
  base.merge_patch(overlay);
  return config_from_json(base);
}

std::string resolved_config_dump(const ExperimentConfig& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = to_json(cfg).dump();
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SdeSystem system_from_config(const SystemConfig& sys) {
  if (sys.kind == "vdp_additive") return vdp_additive(sys.eps, sys.sigma1, sys.sigma2);
  if (sys.kind == "vdp_multiplicative") {
    return vdp_multiplicative(sys.eps, sys.sigma1, sys.sigma2);
  }
  if (sys.kind == "polynomial") {
    if (sys.theta1.size() != 4 || sys.theta2.size() != 4) {
      throw std::invalid_argument("polynomial system needs 4 theta coefficients each");
    }
    PolynomialSdeOptions opts;
    opts.x_lo = sys.poly_x_lo;
    opts.x_hi = sys.poly_x_hi;
    opts.max_clamp_fraction = sys.clamp_budget;
    Eigen::Vector4d t1(sys.theta1.data());
    Eigen::Vector4d t2(sys.theta2.data());
    return polynomial_sde(t1, t2, opts);
  }
  throw std::invalid_argument("unknown system kind: " + sys.kind);
}

FeatureConfig feature_config(const ExperimentConfig& cfg, bool include_noise_features) {
  const SdeSystem sys = system_from_config(cfg.system);
  FeatureConfig f;
  f.state_dim = sys.dim;
  f.noise_dim = sys.dim;  // noise features hold the applied increments
  f.delay = cfg.features.delay;
  f.poly_degrees = cfg.features.poly_degrees;
  f.include_constant = cfg.features.include_constant;
  f.include_noise_features = include_noise_features;
  return f;
}

NoisePolicy noise_policy_from_string(const std::string& name) {
  if (name == "zero") return NoisePolicy::Zero;
  if (name == "oracle") return NoisePolicy::Oracle;
  if (name == "residual") return NoisePolicy::Residual;
  throw std::invalid_argument("unknown noise policy: " + name);
}

namespace {

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double llo = std::log10(lo);
  const double lhi = std::log10(hi);
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, llo + (lhi - llo) * i / (count - 1));
  }
  return grid;
}

}  // namespace

std::vector<double> alpha_grid_from_config(const TrainingConfig& t) {
  return log_grid(t.alpha_lo, t.alpha_hi, t.alpha_count);
}

std::vector<double> lambda_grid_from_config(const EegFileConfig& e) {
  return log_grid(e.lambda_lo, e.lambda_hi, e.lambda_count);
}

nlohmann::json reference_metadata(const std::string& experiment) {
  if (experiment == "train_lownoise") {
    return json{{"alpha", 7.7426e-7}, {"test_rmse", 2.2412e-6}};
  }
  if (experiment == "control_lownoise") return json{{"total_rmse", 0.1654}};
  if (experiment == "compare") {
    return json{{"stochastic_rmse", 0.3632},
                {"conventional_divergence_step", 302},
                {"control_signal_band", json::array({-160.0, 160.0})}};
  }
  if (experiment == "multiplicative") return json{{"total_rmse", 0.2359}};
  if (experiment == "identify") {
    return json{{"alpha", 0.0012},
                {"beta", 1e-5},
                {"theta1", json::array({0.0, -5.8878, 0.0, 0.0})},
                {"theta2", json::array({0.0, -0.1150, 4.0277, 0.0375})}};
  }
  if (experiment == "eeg_pipeline") {
    return json{{"alpha", 0.1931}, {"phase_b_rmse", 0.1331}, {"phase_c_rmse", 0.0752}};
  }
  return json::object();
}

}  // namespace sngrc
