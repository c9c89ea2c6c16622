#include "sngrc/pipeline.hpp"

#include <cmath>

#include "sngrc/rng.hpp"

namespace sngrc {

RunSeeds RunSeeds::from(std::uint64_t run_seed) {
  return RunSeeds{rng::derive_seed(run_seed, 1), rng::derive_seed(run_seed, 2),
                  rng::derive_seed(run_seed, 3), rng::derive_seed(run_seed, 4)};
}

Trajectory slice_trajectory(const Trajectory& traj, std::size_t begin, std::size_t count) {
  if (count < 1 || begin + count > static_cast<std::size_t>(traj.states.rows())) {
    throw std::out_of_range("slice_trajectory: window out of range");
  }
  Trajectory out;
  out.grid.t0 = traj.grid.time(begin);
  out.grid.dt = traj.grid.dt;
  out.grid.n_steps = count - 1;
  const auto b = static_cast<Eigen::Index>(begin);
  const auto steps = static_cast<Eigen::Index>(count - 1);
  out.states = traj.states.middleRows(b, static_cast<Eigen::Index>(count));
  if (traj.has_inputs()) out.inputs = traj.inputs.middleRows(b, steps);
  if (traj.has_noises()) out.noises = traj.noises.middleRows(b, steps);
  if (traj.noise_increments.rows() > 0) {
    out.noise_increments = traj.noise_increments.middleRows(b, steps);
  }
  return out;
}

Vec uniform_initial_state(int dim, std::uint64_t seed) {
  Vec x0(dim);
  for (int j = 0; j < dim; ++j) {
    x0[j] = -2.0 + 4.0 * rng::uniform01(seed, rng::kInitBase + static_cast<std::uint32_t>(j), 0);
  }
  return x0;
}

TrainResult train_model(const Trajectory& window, const FeatureConfig& fc,
                        const TrainingConfig& tc) {
  const DesignMatrices design = assemble_design(window, fc);

  TrainResult res;
  // Rank-deficient feature matrix (e.g. a constant trajectory) still fits
  // under ridge, but flag it.
  const Vec row_means = design.features.rowwise().mean();
  const double max_var =
      (design.features.colwise() - row_means).rowwise().squaredNorm().maxCoeff() /
      static_cast<double>(design.features.cols());
  res.degenerate_features = max_var < 1e-20;

  const std::vector<double> grid = alpha_grid_from_config(tc);
  res.alpha_selection =
      select_alpha(design.features, design.targets, grid, tc.holdout_fraction, fc);

  const Eigen::Index total = design.features.cols();
  const auto n_hold = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor(tc.holdout_fraction * static_cast<double>(total))));
  const Eigen::Index n_train = total - n_hold;
  res.weights = ridge_fit(design.features.leftCols(n_train), design.targets.leftCols(n_train),
                          res.alpha_selection.best_alpha, fc);
  for (std::size_t i = 0; i < res.alpha_selection.alphas.size(); ++i) {
    if (res.alpha_selection.alphas[i] == res.alpha_selection.best_alpha) {
      res.test_rmse = res.alpha_selection.validation_rmse[i];
    }
  }
  return res;
}

ControlExperiment run_control_experiment(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                         bool stochastic_mode) {
  const RunSeeds seeds = RunSeeds::from(run_seed);
  const SdeSystem plant = system_from_config(cfg.system);
  const FeatureConfig fc = feature_config(cfg, stochastic_mode);
  const std::size_t transient = cfg.grid.transient;
  if (cfg.grid.steps <= transient + 2) {
    throw std::invalid_argument("run_control_experiment: grid.steps must exceed transient");
  }
  if (transient < static_cast<std::size_t>(fc.delay)) {
    throw std::invalid_argument("run_control_experiment: transient shorter than feature delay");
  }

  ControlExperiment exp;
  const TimeGrid grid{0.0, cfg.grid.dt, cfg.grid.steps};
  SimulateOptions sim_opts;
  sim_opts.blowup_bound = cfg.grid.blowup_bound;

  exp.original =
      simulate(plant, uniform_initial_state(plant.dim, seeds.original), grid, seeds.original, sim_opts);

  exp.perturbation = make_perturbation(plant.dim, cfg.grid.steps, cfg.training.perturb_amplitude,
                                       cfg.training.perturb_hold, seeds.perturbation);
  const InputSource input = input_from_matrix(exp.perturbation.u);
  SimulateOptions pert_opts = sim_opts;
  pert_opts.input = &input;
  exp.perturbed = simulate(plant, uniform_initial_state(plant.dim, seeds.perturbed), grid,
                           seeds.perturbed, pert_opts);

  // Train on the post-transient window of the perturbed trajectory.
  const std::size_t window_len = cfg.grid.steps - transient + 1;
  const Trajectory train_window = slice_trajectory(exp.perturbed, transient, window_len);
  exp.training = train_model(train_window, fc, cfg.training);

  // Desired trajectory: amplitude-scaled post-transient original orbit.
  const Trajectory base = slice_trajectory(exp.original, transient, window_len - 1);
  exp.desired = make_desired(base, cfg.controller.events);

  // Control takes over the original system at the end of the transient.
  const GainMatrix k = GainMatrix::diagonal(plant.dim, cfg.controller.k_diag);
  ClosedLoopOptions loop;
  loop.policy = noise_policy_from_string(cfg.controller.noise_policy);
  loop.trigger_threshold = cfg.controller.trigger_threshold;
  loop.blowup_bound = cfg.grid.blowup_bound;
  loop.init_states = exp.original.states.middleRows(
      static_cast<Eigen::Index>(transient - static_cast<std::size_t>(fc.delay)), fc.delay + 1);

  const Vec x_start = exp.original.states.row(static_cast<Eigen::Index>(transient)).transpose();
  const std::size_t start_index = nearest_base_index(exp.desired, x_start);
  const std::size_t horizon = exp.desired.size() - start_index - 1;
  exp.control_grid = TimeGrid{exp.original.grid.time(transient), cfg.grid.dt, horizon};
  DesiredTrajectory desired_window = exp.desired;
  if (start_index > 0) {
    desired_window.base_states =
        exp.desired.base_states.bottomRows(static_cast<Eigen::Index>(exp.desired.size() - start_index));
    for (auto& [step, factor] : desired_window.events) {
      step = step > start_index ? step - start_index : 0;
    }
  }

  exp.log = closed_loop_run(plant, exp.training.weights, desired_window, k, exp.control_grid,
                            seeds.control, loop);
  return exp;
}

RunOutcome try_run_control_experiment(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                      bool stochastic_mode) {
  RunOutcome out;
  try {
    out.experiment = run_control_experiment(cfg, run_seed, stochastic_mode);
  } catch (const BlowupError& e) {
    out.diverged = true;
    out.diverged_step = e.step();
    out.stage = "simulate";
    return out;
  }
  if (out.experiment->log.summary.diverged_at) {
    out.diverged = true;
    out.diverged_step = out.experiment->log.summary.diverged_at;
    out.stage = "control";
  }
  return out;
}

namespace {

SweepGrid run_sweep_impl(const ExperimentConfig& cfg, bool parallel) {
  SweepGrid grid;
  grid.sigmas = cfg.sweep.sigmas;
  grid.epss = cfg.sweep.epss;
  grid.repeats = cfg.repeats;
  const std::size_t n_cells = grid.sigmas.size() * grid.epss.size();
  grid.cells.resize(n_cells);

  struct Task {
    std::size_t cell;
    int repeat;
  };
  std::vector<Task> tasks;
  tasks.reserve(n_cells * static_cast<std::size_t>(cfg.repeats));
  for (std::size_t c = 0; c < n_cells; ++c) {
    for (int r = 0; r < cfg.repeats; ++r) tasks.push_back({c, r});
  }

  struct RunResult {
    bool diverged = false;
    double total = 0.0;
    double x = 0.0;
    double y = 0.0;
  };
  std::vector<RunResult> results(tasks.size());

  const auto run_task = [&](std::size_t t) {
    const auto [cell, repeat] = tasks[t];
    const std::size_t si = cell / grid.epss.size();
    const std::size_t ei = cell % grid.epss.size();
    ExperimentConfig run_cfg = cfg;
    run_cfg.system.sigma1 = grid.sigmas[si];
    run_cfg.system.sigma2 = cfg.sweep.sigma2_ratio * grid.sigmas[si];
    run_cfg.system.eps = grid.epss[ei];
    const std::uint64_t run_seed =
        rng::derive_seed(cfg.seed, 1000003ull * cell + static_cast<std::uint64_t>(repeat));
    const RunOutcome outcome = try_run_control_experiment(run_cfg, run_seed, true);
    RunResult& res = results[t];
    if (outcome.diverged || !outcome.experiment) {
      res.diverged = true;
      return;
    }
    const ControlSummary& s = outcome.experiment->log.summary;
    res.total = s.total_rmse;
    res.x = s.per_component_rmse[0];
    res.y = s.per_component_rmse.size() > 1 ? s.per_component_rmse[1] : 0.0;
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  }

  for (std::size_t c = 0; c < n_cells; ++c) {
    SweepCell& cell = grid.cells[c];
    cell.sigma = grid.sigmas[c / grid.epss.size()];
    cell.eps = grid.epss[c % grid.epss.size()];
    cell.repeats = cfg.repeats;
    std::vector<double> totals;
    std::vector<double> xs;
    std::vector<double> ys;
    double mean_total = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].cell != c) continue;
      if (results[t].diverged) {
        ++cell.n_diverged;
        continue;
      }
      totals.push_back(results[t].total);
      xs.push_back(results[t].x);
      ys.push_back(results[t].y);
      mean_total += results[t].total;
    }
    cell.median_total = median(totals);
    cell.median_x = median(xs);
    cell.median_y = median(ys);
    cell.mean_total = totals.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : mean_total / static_cast<double>(totals.size());
  }
  return grid;
}

}  // namespace

SweepGrid run_sweep(const ExperimentConfig& cfg, bool parallel) {
  return run_sweep_impl(cfg, parallel);
}

SweepGrid run_sweep_reference(const ExperimentConfig& cfg) { return run_sweep_impl(cfg, false); }

IdentifyResult run_identify(const Vec& processed, double dt, const EegFileConfig& eeg) {
  IdentifyResult res;
  res.km = km_targets(processed, dt);
  const std::vector<double> grid = lambda_grid_from_config(eeg);
  res.fit = fit_sde(processed, dt, grid, eeg.kfolds);
  res.eval = evaluate_fit(res.fit, res.km);
  return res;
}

EegPipelineResult run_eeg_pipeline(const Vec& processed, const ExperimentConfig& cfg,
                                   std::uint64_t run_seed) {
  const EegFileConfig& eeg = cfg.eeg;
  const double dt = static_cast<double>(eeg.downsample) / eeg.rate;
  const std::size_t need = eeg.original_start + eeg.phase_c_steps + 1;
  if (static_cast<std::size_t>(processed.size()) < need) {
    throw std::invalid_argument("run_eeg_pipeline: processed series too short");
  }

  EegPipelineResult res;
  res.identify = run_identify(processed, dt, eeg);

  // Phase A: controlled SDE from the fit, driven by a random perturbation.
  PolynomialSdeOptions popts;
  popts.x_lo = cfg.system.poly_x_lo;
  popts.x_hi = cfg.system.poly_x_hi;
  popts.max_clamp_fraction = cfg.system.clamp_budget;
  Eigen::Vector4d t1 = Eigen::Vector4d::Zero();
  Eigen::Vector4d t2 = Eigen::Vector4d::Zero();
  for (int i = 0; i <= res.identify.fit.degree && i < 4; ++i) {
    t1[i] = res.identify.fit.theta1[i];
    t2[i] = res.identify.fit.theta2[i];
  }
  SdeSystem plant;
  try {
    plant = polynomial_sde(t1, t2, popts);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("phase A: ") + e.what());
  }

  const RunSeeds seeds = RunSeeds::from(run_seed);
  const TimeGrid phase_a_grid{0.0, dt, eeg.phase_a_steps};
  const PerturbationSignal perturb = make_perturbation(
      1, eeg.phase_a_steps, eeg.perturb_amplitude, eeg.perturb_hold, seeds.perturbation);
  const InputSource input = input_from_matrix(perturb.u);
  SimulateOptions sim_opts;
  sim_opts.input = &input;
  Vec x0(1);
  x0[0] = processed[0];
  try {
    res.phase_a_perturbed = simulate(plant, x0, phase_a_grid, seeds.perturbed, sim_opts);
  } catch (const BlowupError& e) {
    throw std::runtime_error(std::string("phase A: ") + e.what());
  }

  // Phase B: train the stochastic NG-RC on the perturbed data; the holdout
  // tail is the one-step validation window.
  FeatureConfig fc;
  fc.state_dim = 1;
  fc.noise_dim = 1;
  fc.delay = cfg.features.delay;
  fc.poly_degrees = cfg.features.poly_degrees;
  fc.include_constant = cfg.features.include_constant;
  fc.include_noise_features = true;
  const std::size_t window_len = eeg.phase_a_steps - eeg.phase_a_discard + 1;
  const Trajectory window = slice_trajectory(res.phase_a_perturbed, eeg.phase_a_discard, window_len);
  TrainingConfig tc;
  tc.perturb_amplitude = eeg.perturb_amplitude;
  tc.perturb_hold = eeg.perturb_hold;
  tc.alpha_lo = cfg.training.alpha_lo;
  tc.alpha_hi = cfg.training.alpha_hi;
  tc.alpha_count = cfg.training.alpha_count;
  tc.holdout_fraction = static_cast<double>(eeg.phase_b_steps) /
                        static_cast<double>(window.n_steps() - static_cast<std::size_t>(fc.delay));
  const TrainResult training = train_model(window, fc, tc);
  res.phase_a_alpha = training.alpha_selection.best_alpha;
  res.phase_b_rmse = training.test_rmse;

  // Phase C: drive the seizure segment toward the resting-state trajectory.
  Trajectory desired_base;
  desired_base.grid = TimeGrid{0.0, dt, eeg.phase_c_steps};
  desired_base.states = processed.head(static_cast<Eigen::Index>(eeg.phase_c_steps + 1));
  const DesiredTrajectory desired = make_desired(desired_base, {});

  const GainMatrix k = GainMatrix::diagonal(1, cfg.controller.k_diag);
  ClosedLoopOptions loop;
  loop.policy = noise_policy_from_string(cfg.controller.noise_policy);
  loop.trigger_threshold = cfg.controller.trigger_threshold;
  loop.blowup_bound = cfg.grid.blowup_bound;
  loop.init_states.resize(fc.delay + 1, 1);
  for (int lag = 0; lag <= fc.delay; ++lag) {
    loop.init_states(lag, 0) =
        processed[static_cast<Eigen::Index>(eeg.original_start) -
                  static_cast<Eigen::Index>(fc.delay - lag)];
  }
  const TimeGrid phase_c_grid{0.0, dt, eeg.phase_c_steps};
  res.phase_c_log =
      closed_loop_run(plant, training.weights, desired, k, phase_c_grid, seeds.control, loop);

  // Three-way KDE: desired resting segment, controlled run, original seizure
  // segment.
  const Vec desired_samples = desired_base.states.col(0);
  Vec controlled_samples(static_cast<Eigen::Index>(res.phase_c_log.records.size()));
  for (std::size_t i = 0; i < res.phase_c_log.records.size(); ++i) {
    controlled_samples[static_cast<Eigen::Index>(i)] = res.phase_c_log.records[i].x[0];
  }
  const Vec original_samples =
      processed.segment(static_cast<Eigen::Index>(eeg.original_start),
                        static_cast<Eigen::Index>(eeg.phase_c_steps));

  // Per-distribution bandwidths on a shared grid so the curves are
  // directly comparable.
  const auto bandwidth_of = [](const Vec& samples) {
    const double h = silverman_bandwidth(samples);
    return h > 0.0 ? h : 1e-3 * (1.0 + std::abs(samples[0]));
  };
  const double h_des = bandwidth_of(desired_samples);
  const double h_ctl = bandwidth_of(controlled_samples);
  const double h_org = bandwidth_of(original_samples);
  Vec pooled(desired_samples.size() + controlled_samples.size() + original_samples.size());
  pooled << desired_samples, controlled_samples, original_samples;
  const double h_max = std::max({h_des, h_ctl, h_org});
  const Vec grid = default_kde_grid(pooled, h_max);
  res.kde_desired = kde(desired_samples, grid, h_des);
  res.kde_controlled = kde(controlled_samples, grid, h_ctl);
  res.kde_original = kde(original_samples, grid, h_org);
  res.iqr_controlled = density_iqr(res.kde_controlled);
  res.iqr_original = density_iqr(res.kde_original);
  return res;
}

}  // namespace sngrc
