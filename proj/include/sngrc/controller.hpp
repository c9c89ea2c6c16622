#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sngrc/features.hpp"
#include "sngrc/sde.hpp"
#include "sngrc/types.hpp"

namespace sngrc {

/// Closed-loop gain; construction rejects any K with spectral radius >= 1
/// (eigenvalues, 1e-10 tolerance).
struct GainMatrix {
  Mat k;
  double spectral_radius = 0.0;

  static GainMatrix make(const Mat& k);
  static GainMatrix diagonal(int dim, double value);
};

/// Amplitude-scaled reference orbit: the desired state at step i is
/// center + factor(i) * (base_i - center), where factor(i) comes from the
/// last event triggered at or before i (1 before the first event).
struct DesiredTrajectory {
  TimeGrid grid;
  Mat base_states;
  std::vector<std::pair<std::size_t, double>> events;  // (trigger step, factor)
  Vec center;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(base_states.rows()); }
  [[nodiscard]] double factor_at(std::size_t i) const;
  [[nodiscard]] Vec state_at(std::size_t i) const;
};

/// Builds a DesiredTrajectory from a base orbit. The default center is the
/// mean of the base states over their final 80%.
DesiredTrajectory make_desired(const Trajectory& base,
                               std::vector<std::pair<std::size_t, double>> events,
                               std::optional<Vec> center = std::nullopt);

/// Index of the base-orbit point nearest to x (Euclidean), used to align the
/// desired phase with the plant state at control activation.
std::size_t nearest_base_index(const DesiredTrajectory& desired, const Vec& x);

/// Static event trigger: fires when ||e|| >= threshold.
bool static_trigger(const Vec& e, double threshold);

/// Piecewise-constant training perturbation, one independent uniform draw on
/// [-amplitude, amplitude] per component per hold block.
struct PerturbationSignal {
  Mat u;  // n_steps x dim
  double amplitude = 0.0;
  std::size_t hold = 1;
  std::uint64_t seed = 0;
};

PerturbationSignal make_perturbation(int dim, std::size_t n_steps, double amplitude,
                                     std::size_t hold, std::uint64_t seed);

/// Wraps a per-step input matrix as an InputSource (copies the matrix).
InputSource input_from_matrix(Mat u);

/// Inverse-model control law
///   u = W_u^-1 [x_des_next - W_X o_x - W_n o_n + K e].
/// Conventional weights (empty w_n) omit the noise term. Falls back to a
/// pseudo-inverse when cond(W_u) >= 1e8 (reported via used_pseudo_inverse).
struct ControlInput {
  Vec u;
  bool used_pseudo_inverse = false;
};

ControlInput control_input(const WeightBlocks& w, const Vec& o_x, const Vec& o_n,
                           const Vec& x_des_next, const Vec& e, const GainMatrix& k);

/// How the controller fills the noise-feature block o_n at control time:
///   Zero     - conditional expectation (all zeros), the default;
///   Oracle   - the exact increment the plant will apply this step;
///   Residual - previous-step innovation mapped through W_n.
enum class NoisePolicy { Zero, Oracle, Residual };

struct ControlRecord {
  double t = 0.0;
  Vec x;
  Vec x_des;
  Vec u;
  Vec o_n;
  Vec e;
  bool triggered = false;
};

struct ControlSummary {
  double total_rmse = 0.0;
  Vec per_component_rmse;
  double max_abs_u = 0.0;
  std::optional<std::size_t> diverged_at;
  std::size_t n_triggers = 0;
  bool wu_ill_conditioned = false;
};

struct ControlLog {
  std::vector<ControlRecord> records;
  ControlSummary summary;
};

struct ClosedLoopOptions {
  NoisePolicy policy = NoisePolicy::Zero;
  double trigger_threshold = 0.2;
  double blowup_bound = 1e6;
  Mat init_states;  // (delay+1) x dim, oldest state first
};

/// Runs the feedback loop against a true plant: at each step it builds
/// features from the realized history, computes the control input, advances
/// the plant one Euler-Maruyama step with a fresh noise draw, and logs
/// everything. A blowup is recorded as the divergence step; the run returns
/// normally.
ControlLog closed_loop_run(const SdeSystem& plant, const WeightBlocks& w,
                           const DesiredTrajectory& desired, const GainMatrix& k,
                           const TimeGrid& grid, std::uint64_t seed,
                           const ClosedLoopOptions& opts);

/// Same loop with the learned model as the plant (for the model-space
/// closure identity e_{i+1} = K e_i). Synthetic increments of scale
/// noise_scale are applied by the model and, under the Oracle policy, shown
/// to the controller.
ControlLog closed_loop_model_run(const WeightBlocks& w, const DesiredTrajectory& desired,
                                 const GainMatrix& k, const TimeGrid& grid,
                                 std::uint64_t seed, double noise_scale,
                                 const ClosedLoopOptions& opts);

/// Recomputes the summary from the records (RMSE over all logged errors).
ControlSummary summarize(const std::vector<ControlRecord>& records,
                         std::optional<std::size_t> diverged_at, bool wu_flag);

}  // namespace sngrc
