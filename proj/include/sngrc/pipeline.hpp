#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sngrc/config.hpp"
#include "sngrc/controller.hpp"
#include "sngrc/eeg.hpp"
#include "sngrc/features.hpp"
#include "sngrc/metrics.hpp"
#include "sngrc/sde.hpp"
#include "sngrc/sysid.hpp"

namespace sngrc {

/// Seed bookkeeping for one experiment run: child seeds are derived from the
/// run seed with fixed tags so each stage owns an independent stream.
struct RunSeeds {
  std::uint64_t original;
  std::uint64_t perturbation;
  std::uint64_t perturbed;
  std::uint64_t control;

  static RunSeeds from(std::uint64_t run_seed);
};

/// States [begin, begin+count) of a trajectory as a standalone trajectory
/// (count-1 steps, inputs/noises realigned).
Trajectory slice_trajectory(const Trajectory& traj, std::size_t begin, std::size_t count);

/// Uniform initial state on [-2, 2]^dim drawn from the given seed.
Vec uniform_initial_state(int dim, std::uint64_t seed);

struct TrainResult {
  WeightBlocks weights;
  AlphaSelection alpha_selection;
  double test_rmse = 0.0;        // one-step RMSE on the held-out tail
  bool degenerate_features = false;
};

/// Alpha selection plus final fit on the leading training fraction; the
/// holdout RMSE at the selected alpha is the reported test RMSE.
TrainResult train_model(const Trajectory& window, const FeatureConfig& fc,
                        const TrainingConfig& tc);

/// Everything one simulate -> perturb -> train -> control run produces.
struct ControlExperiment {
  Trajectory original;
  Trajectory perturbed;
  PerturbationSignal perturbation;
  DesiredTrajectory desired;
  TrainResult training;
  ControlLog log;
  TimeGrid control_grid;
};

/// Full pipeline for the Van der Pol experiments; stochastic_mode false
/// trains and controls with the conventional (noise-feature-free) model.
/// Throws BlowupError if a training-stage simulation leaves the admissible
/// range; control-stage divergence is recorded in the log instead.
ControlExperiment run_control_experiment(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                         bool stochastic_mode);

/// Outcome wrapper for sweep/compare aggregation: training-stage blowups are
/// reported as diverged runs rather than exceptions.
struct RunOutcome {
  bool diverged = false;
  std::optional<std::size_t> diverged_step;
  std::string stage = "none";  // "simulate" or "control" when diverged
  std::optional<ControlExperiment> experiment;
};

RunOutcome try_run_control_experiment(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                      bool stochastic_mode);

/// sigma x eps robustness grid, repeats runs per cell with derived seeds,
/// (sigma1, sigma2) = (sigma, ratio*sigma). Cells run as independent tasks
/// (parallel by default) and are merged by index.
SweepGrid run_sweep(const ExperimentConfig& cfg, bool parallel = true);

/// Serial reference kept for testing the parallel sweep.
SweepGrid run_sweep_reference(const ExperimentConfig& cfg);

/// Kramers-Moyal identification bundle for a processed scalar series.
struct IdentifyResult {
  KmEstimates km;
  SparseSdeFit fit;
  FitEvaluation eval;
};

IdentifyResult run_identify(const Vec& processed, double dt, const EegFileConfig& eeg);

/// Three-phase EEG control pipeline on a processed series.
struct EegPipelineResult {
  IdentifyResult identify;
  Trajectory phase_a_perturbed;
  double phase_a_alpha = 0.0;
  double phase_b_rmse = 0.0;
  ControlLog phase_c_log;
  DensityEstimate kde_desired;
  DensityEstimate kde_controlled;
  DensityEstimate kde_original;
  double iqr_controlled = 0.0;
  double iqr_original = 0.0;
};

EegPipelineResult run_eeg_pipeline(const Vec& processed, const ExperimentConfig& cfg,
                                   std::uint64_t run_seed);

}  // namespace sngrc
