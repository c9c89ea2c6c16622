// sngrc command-line harness: reproduces each experiment end to end from a
// config file. See README.md for the preset catalogue and output layout.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sngrc/config.hpp"
#include "sngrc/eeg.hpp"
#include "sngrc/io.hpp"
#include "sngrc/metrics.hpp"
#include "sngrc/pipeline.hpp"
#include "sngrc/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sngrc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDivergence = 2;
constexpr int kExitBadInput = 3;
constexpr int kExitNumerical = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::optional<double> rate;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_rate = false) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--repeats", args.repeats, "override the config repeat count");
  if (with_rate) cmd->add_option("--rate", args.rate, "raw sample rate in Hz (default 256)");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.repeats) cfg.repeats = *args.repeats;
  if (args.rate) cfg.eeg.rate = *args.rate;
  return cfg;
}

std::vector<std::string> stamp(const ExperimentConfig& cfg) {
  return {"config_hash=" + config_hash(cfg), "seed=" + std::to_string(cfg.seed)};
}

void write_resolved_config(const ExperimentConfig& cfg, const fs::path& out) {
  io::write_text_atomic(out / "resolved_config.json", resolved_config_dump(cfg));
}

json summary_json(const ControlSummary& s) {
  json j;
  j["total_rmse"] = s.total_rmse;
  j["rmse_x"] = s.per_component_rmse.size() > 0 ? s.per_component_rmse[0] : 0.0;
  if (s.per_component_rmse.size() > 1) j["rmse_y"] = s.per_component_rmse[1];
  j["max_abs_u"] = s.max_abs_u;
  j["n_triggers"] = s.n_triggers;
  j["wu_ill_conditioned"] = s.wu_ill_conditioned;
  if (s.diverged_at) {
    j["diverged_at"] = *s.diverged_at;
  } else {
    j["diverged_at"] = nullptr;
  }
  return j;
}

void write_desired_csv(const fs::path& path, const DesiredTrajectory& desired,
                       const std::vector<std::string>& comments) {
  std::vector<std::pair<std::string, Vec>> cols;
  const std::size_t n = desired.size();
  const int dim = static_cast<int>(desired.base_states.cols());
  Vec t(static_cast<Eigen::Index>(n));
  std::vector<Vec> xs(static_cast<std::size_t>(dim), Vec(static_cast<Eigen::Index>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    t[static_cast<Eigen::Index>(i)] = desired.grid.time(i);
    const Vec x = desired.state_at(i);
    for (int j = 0; j < dim; ++j) xs[static_cast<std::size_t>(j)][static_cast<Eigen::Index>(i)] = x[j];
  }
  cols.emplace_back("t", std::move(t));
  for (int j = 0; j < dim; ++j) {
    cols.emplace_back("x" + std::to_string(j + 1), std::move(xs[static_cast<std::size_t>(j)]));
  }
  io::write_series_csv(path, cols, comments);
}

// ---------------------------------------------------------------------------
// simulate: original + perturbed + desired trajectories, with display files
// that drop the transient.

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out) {
  const RunSeeds seeds = RunSeeds::from(cfg.seed);
  const SdeSystem plant = system_from_config(cfg.system);
  const TimeGrid grid{0.0, cfg.grid.dt, cfg.grid.steps};
  SimulateOptions sim_opts;
  sim_opts.blowup_bound = cfg.grid.blowup_bound;
  const auto comments = stamp(cfg);

  const Trajectory original =
      simulate(plant, uniform_initial_state(plant.dim, seeds.original), grid, seeds.original, sim_opts);

  const PerturbationSignal perturb =
      make_perturbation(plant.dim, cfg.grid.steps, cfg.training.perturb_amplitude,
                        cfg.training.perturb_hold, seeds.perturbation);
  const InputSource input = input_from_matrix(perturb.u);
  SimulateOptions pert_opts = sim_opts;
  pert_opts.input = &input;
  const Trajectory perturbed = simulate(plant, uniform_initial_state(plant.dim, seeds.perturbed),
                                        grid, seeds.perturbed, pert_opts);

  const std::size_t transient = cfg.grid.transient;
  const std::size_t window = cfg.grid.steps - transient;
  const Trajectory base = slice_trajectory(original, transient, window);
  const DesiredTrajectory desired = make_desired(base, cfg.controller.events);

  io::write_trajectory_csv(out / "original.csv", original, comments);
  io::write_trajectory_csv(out / "perturbed.csv", perturbed, comments);
  write_desired_csv(out / "desired.csv", desired, comments);
  io::write_trajectory_csv(out / "original_display.csv", base, comments);
  io::write_trajectory_csv(out / "perturbed_display.csv",
                           slice_trajectory(perturbed, transient, window), comments);
  write_resolved_config(cfg, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train: fit the NG-RC on the perturbed trajectory written by simulate.

int cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
  const fs::path traj_path = out / "perturbed.csv";
  if (!fs::exists(traj_path)) {
    throw io::CsvError("missing " + traj_path.string() + " (run `sngrc simulate` first)");
  }
  io::TrajectoryCsv loaded = io::read_trajectory_csv(traj_path);
  if (!loaded.has_inputs || !loaded.has_noises) {
    throw io::CsvError("perturbed trajectory must carry input and noise columns");
  }
  const SdeSystem plant = system_from_config(cfg.system);
  loaded.trajectory.recompute_increments(plant);

  const std::size_t transient = cfg.grid.transient;
  const std::size_t window_len = loaded.trajectory.n_steps() - transient + 1;
  const Trajectory window = slice_trajectory(loaded.trajectory, transient, window_len);
  const FeatureConfig fc = feature_config(cfg, cfg.features.include_noise_features);
  const TrainResult res = train_model(window, fc, cfg.training);

  const auto comments = stamp(cfg);
  io::write_weights_csv(out / "weights.csv", out / "weights.json", res.weights, comments);

  json report;
  report["selected_alpha"] = res.alpha_selection.best_alpha;
  report["test_rmse"] = res.test_rmse;
  report["degenerate_features"] = res.degenerate_features;
  report["alpha_grid"] = res.alpha_selection.alphas;
  report["validation_rmse"] = res.alpha_selection.validation_rmse;
  report["normal_eq_residual"] = res.weights.normal_eq_residual;
  report["reference"] = reference_metadata("train_lownoise");
  report["config_hash"] = config_hash(cfg);
  report["seed"] = cfg.seed;
  io::write_text_atomic(out / "train_report.json", report.dump(2) + "\n");
  write_resolved_config(cfg, out);

  if (res.degenerate_features) {
    std::cerr << "warning: rank-deficient features (constant trajectory?)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// control: closed-loop run from saved weights and the original trajectory.

int cmd_control(const ExperimentConfig& cfg, const fs::path& out) {
  const fs::path weights_path = out / "weights.csv";
  const fs::path original_path = out / "original.csv";
  if (!fs::exists(weights_path) || !fs::exists(original_path)) {
    throw io::CsvError("missing weights.csv/original.csv (run simulate and train first)");
  }
  const WeightBlocks w = io::read_weights_csv(weights_path, out / "weights.json");
  const Trajectory original = io::read_trajectory_csv(original_path).trajectory;
  const SdeSystem plant = system_from_config(cfg.system);
  const RunSeeds seeds = RunSeeds::from(cfg.seed);

  const std::size_t transient = cfg.grid.transient;
  const std::size_t window = original.states.rows() - transient - 1;
  const Trajectory base = slice_trajectory(original, transient, window);
  const DesiredTrajectory desired = make_desired(base, cfg.controller.events);

  const GainMatrix k = GainMatrix::diagonal(plant.dim, cfg.controller.k_diag);
  ClosedLoopOptions loop;
  loop.policy = noise_policy_from_string(cfg.controller.noise_policy);
  loop.trigger_threshold = cfg.controller.trigger_threshold;
  loop.blowup_bound = cfg.grid.blowup_bound;
  loop.init_states = original.states.middleRows(
      static_cast<Eigen::Index>(transient - static_cast<std::size_t>(w.config.delay)),
      w.config.delay + 1);
  const TimeGrid control_grid{original.grid.time(transient), cfg.grid.dt, desired.size() - 1};

  const ControlLog log = closed_loop_run(plant, w, desired, k, control_grid, seeds.control, loop);

  const auto comments = stamp(cfg);
  io::write_control_log_csv(out / "control_log.csv", log, comments);
  json summary = summary_json(log.summary);
  summary["reference"] = reference_metadata(cfg.system.kind == "vdp_multiplicative"
                                                ? "multiplicative"
                                                : "control_lownoise");
  summary["config_hash"] = config_hash(cfg);
  summary["seed"] = cfg.seed;
  io::write_text_atomic(out / "control_summary.json", summary.dump(2) + "\n");
  write_resolved_config(cfg, out);

  return log.summary.diverged_at ? kExitDivergence : kExitOk;
}

// ---------------------------------------------------------------------------
// compare: conventional vs stochastic on identical seeds and training data.

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

int cmd_compare(const ExperimentConfig& cfg, const fs::path& out) {
  const auto comments = stamp(cfg);
  json verdict;
  verdict["runs"] = json::array();
  int conventional_diverged = 0;
  int stochastic_diverged = 0;
  std::vector<double> stochastic_rmse;
  std::vector<double> conventional_rmse;

  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t run_seed = rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    const RunOutcome conv = try_run_control_experiment(cfg, run_seed, false);
    const RunOutcome stoch = try_run_control_experiment(cfg, run_seed, true);

    json row;
    row["seed"] = run_seed;
    const auto arm_json = [&](const RunOutcome& o) {
      json a;
      a["diverged"] = o.diverged;
      if (o.diverged) {
        a["stage"] = o.stage;
        if (o.diverged_step) a["diverged_at"] = *o.diverged_step;
      }
      if (o.experiment) a["summary"] = summary_json(o.experiment->log.summary);
      return a;
    };
    row["conventional"] = arm_json(conv);
    row["stochastic"] = arm_json(stoch);

    if (conv.diverged) ++conventional_diverged;
    else if (conv.experiment) conventional_rmse.push_back(conv.experiment->log.summary.total_rmse);
    if (stoch.diverged) ++stochastic_diverged;
    else if (stoch.experiment) stochastic_rmse.push_back(stoch.experiment->log.summary.total_rmse);

    // Both arms are built from the same seeds, so they share the training
    // data; write the perturbation once and checksum it for the record.
    const std::string tag = "seed" + std::to_string(r);
    if (stoch.experiment) {
      io::write_trajectory_csv(out / ("perturbed_" + tag + ".csv"), stoch.experiment->perturbed,
                               comments);
      io::write_control_log_csv(out / ("control_stochastic_" + tag + ".csv"),
                                stoch.experiment->log, comments);
    }
    if (conv.experiment) {
      io::write_control_log_csv(out / ("control_conventional_" + tag + ".csv"),
                                conv.experiment->log, comments);
    }
    if (stoch.experiment && conv.experiment) {
      std::ostringstream a;
      a << stoch.experiment->perturbed.inputs.format(Eigen::FullPrecision);
      std::ostringstream b;
      b << conv.experiment->perturbed.inputs.format(Eigen::FullPrecision);
      row["perturbation_checksum_match"] = fnv1a(a.str()) == fnv1a(b.str());
    }
    verdict["runs"].push_back(row);
  }

  verdict["repeats"] = cfg.repeats;
  verdict["conventional_diverged"] = conventional_diverged;
  verdict["stochastic_diverged"] = stochastic_diverged;
  verdict["conventional_divergence_majority"] = conventional_diverged * 2 > cfg.repeats;
  verdict["stochastic_all_complete"] = stochastic_diverged == 0;
  verdict["median_stochastic_rmse"] = median(stochastic_rmse);
  verdict["median_conventional_rmse"] = median(conventional_rmse);
  verdict["reference"] = reference_metadata("compare");
  verdict["config_hash"] = config_hash(cfg);
  verdict["seed"] = cfg.seed;
  io::write_text_atomic(out / "compare_verdict.json", verdict.dump(2) + "\n");
  write_resolved_config(cfg, out);

  return (conventional_diverged + stochastic_diverged) > 0 ? kExitDivergence : kExitOk;
}

// ---------------------------------------------------------------------------
// sweep: sigma x eps robustness grid.

int cmd_sweep(const ExperimentConfig& cfg, const fs::path& out) {
  const SweepGrid grid = run_sweep(cfg, true);
  const auto comments = stamp(cfg);
  io::write_heatmap_csv(out / "heatmap.csv", grid, comments);

  json j;
  j["sigmas"] = grid.sigmas;
  j["epss"] = grid.epss;
  j["repeats"] = grid.repeats;
  j["sigma2_ratio"] = cfg.sweep.sigma2_ratio;
  j["cells"] = json::array();
  for (const auto& c : grid.cells) {
    j["cells"].push_back(json{{"sigma", c.sigma},
                              {"eps", c.eps},
                              {"median_total", c.median_total},
                              {"median_x", c.median_x},
                              {"median_y", c.median_y},
                              {"mean_total", c.mean_total},
                              {"n_diverged", c.n_diverged},
                              {"repeats", c.repeats}});
  }
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  io::write_text_atomic(out / "sweep.json", j.dump(2) + "\n");
  write_resolved_config(cfg, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// identify / eeg-pipeline input handling.

Mat load_eeg_input(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.eeg.input == "bundled:surrogate") {
    const Mat raw = make_surrogate_raw(surrogate_options_from_config(cfg.eeg), cfg.seed);
    std::string csv;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        if (j > 0) csv += ',';
        csv += io::format17(raw(i, j));
      }
      csv += '\n';
    }
    io::write_text_atomic(out / "surrogate.csv", csv);
    return raw;
  }
  return io::read_matrix_csv(cfg.eeg.input);
}

json fit_json(const SparseSdeFit& fit) {
  json j;
  j["basis"] = json::array({"1", "x", "x^2", "x^3"});
  j["theta1"] = std::vector<double>(fit.theta1.data(), fit.theta1.data() + fit.theta1.size());
  j["theta2"] = std::vector<double>(fit.theta2.data(), fit.theta2.data() + fit.theta2.size());
  j["alpha"] = fit.alpha;
  j["beta"] = fit.beta;
  j["lambda_grid"] = fit.lambda_grid;
  j["cv_drift"] = fit.cv_drift;
  j["cv_diffusion"] = fit.cv_diff;
  j["drift_converged"] = fit.drift_converged;
  j["diffusion_converged"] = fit.diff_converged;
  return j;
}

int cmd_identify(const ExperimentConfig& cfg, const fs::path& out) {
  const Mat raw = load_eeg_input(cfg, out);
  const EegSeries series = preprocess_eeg(raw, cfg.eeg.channel, cfg.eeg.rate, cfg.eeg.downsample);
  if (series.processed.size() < 100) {
    throw io::CsvError("processed series too short (" +
                       std::to_string(series.processed.size()) + " < 100 samples)");
  }
  if (series.degenerate) std::cerr << "warning: constant channel, fit will be all zeros\n";

  const IdentifyResult res = run_identify(series.processed, series.delta_t, cfg.eeg);
  const auto comments = stamp(cfg);

  json j = fit_json(res.fit);
  j["delta_t"] = series.delta_t;
  j["channel"] = cfg.eeg.channel;
  j["degenerate_channel"] = series.degenerate;
  j["rmse_drift"] = res.eval.rmse_drift;
  j["rmse_diffusion"] = res.eval.rmse_diff;
  j["reference"] = reference_metadata("identify");
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  io::write_text_atomic(out / "fit.json", j.dump(2) + "\n");

  const Eigen::Index m = res.km.x.size();
  Vec steps = Vec::LinSpaced(m, 0.0, static_cast<double>(m - 1));
  io::write_series_csv(out / "fig8_drift.csv",
                       {{"step", steps}, {"x", res.km.x}, {"target", res.km.drift},
                        {"prediction", res.eval.drift_pred}},
                       comments);
  io::write_series_csv(out / "fig8_diffusion.csv",
                       {{"step", steps}, {"x", res.km.x}, {"target", res.km.diff2},
                        {"prediction", res.eval.diff2_pred}},
                       comments);

  // Fig 9: density of true vs predicted targets.
  const auto kde_pair = [&](const Vec& truth, const Vec& pred, const fs::path& path) {
    const double ht = std::max(silverman_bandwidth(truth), 1e-12);
    const double hp = std::max(silverman_bandwidth(pred), 1e-12);
    Vec pooled(truth.size() + pred.size());
    pooled << truth, pred;
    const Vec grid = default_kde_grid(pooled, std::max(ht, hp));
    io::write_kde_csv(path, {{"true", kde(truth, grid, ht)}, {"predicted", kde(pred, grid, hp)}},
                      comments);
  };
  kde_pair(res.km.drift, res.eval.drift_pred, out / "kde_drift.csv");
  kde_pair(res.km.diff2, res.eval.diff2_pred, out / "kde_diffusion.csv");
  write_resolved_config(cfg, out);
  return kExitOk;
}

int cmd_eeg_pipeline(const ExperimentConfig& cfg, const fs::path& out) {
  const Mat raw = load_eeg_input(cfg, out);
  const EegSeries series = preprocess_eeg(raw, cfg.eeg.channel, cfg.eeg.rate, cfg.eeg.downsample);
  if (series.processed.size() < 100) {
    throw io::CsvError("processed series too short (" +
                       std::to_string(series.processed.size()) + " < 100 samples)");
  }

  const EegPipelineResult res = run_eeg_pipeline(series.processed, cfg, cfg.seed);
  const auto comments = stamp(cfg);

  io::write_trajectory_csv(out / "phase_a_perturbed.csv", res.phase_a_perturbed, comments);
  io::write_control_log_csv(out / "phase_c_control.csv", res.phase_c_log, comments);
  io::write_kde_csv(out / "kde_compare.csv",
                    {{"desired", res.kde_desired},
                     {"controlled", res.kde_controlled},
                     {"original", res.kde_original}},
                    comments);

  json j;
  j["fit"] = fit_json(res.identify.fit);
  j["phase_a_alpha"] = res.phase_a_alpha;
  j["phase_b_rmse"] = res.phase_b_rmse;
  j["phase_c"] = summary_json(res.phase_c_log.summary);
  j["iqr_controlled"] = res.iqr_controlled;
  j["iqr_original"] = res.iqr_original;
  j["reference"] = reference_metadata("eeg_pipeline");
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  io::write_text_atomic(out / "eeg_summary.json", j.dump(2) + "\n");
  write_resolved_config(cfg, out);

  return res.phase_c_log.summary.diverged_at ? kExitDivergence : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic NG-RC pipeline harness"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "emit original/perturbed/desired trajectories");
  CLI::App* train_cmd = app.add_subcommand("train", "fit NG-RC weights on the perturbed trajectory");
  CLI::App* control_cmd = app.add_subcommand("control", "closed-loop run from saved weights");
  CLI::App* compare_cmd = app.add_subcommand("compare", "conventional vs stochastic NG-RC on paired seeds");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "sigma x eps robustness grid");
  CLI::App* identify_cmd = app.add_subcommand("identify", "Kramers-Moyal sparse SDE identification");
  CLI::App* eeg_cmd = app.add_subcommand("eeg-pipeline", "three-phase identify/train/control pipeline");
  for (CLI::App* cmd : {simulate_cmd, train_cmd, control_cmd, compare_cmd, sweep_cmd}) {
    add_common(cmd, args);
  }
  add_common(identify_cmd, args, true);
  add_common(eeg_cmd, args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(args);
    const fs::path out = args.out_dir;
    std::filesystem::create_directories(out);
    if (simulate_cmd->parsed()) return cmd_simulate(cfg, out);
    if (train_cmd->parsed()) return cmd_train(cfg, out);
    if (control_cmd->parsed()) return cmd_control(cfg, out);
    if (compare_cmd->parsed()) return cmd_compare(cfg, out);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg, out);
    if (identify_cmd->parsed()) return cmd_identify(cfg, out);
    if (eeg_cmd->parsed()) return cmd_eeg_pipeline(cfg, out);
  } catch (const BlowupError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const io::CsvError& e) {
    std::cerr << "bad input: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const SingularMatrixError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "bad input: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "bad input: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
