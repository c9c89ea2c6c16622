#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sngrc/types.hpp"

namespace sngrc {

/// Equally spaced time grid; sample times are computed multiplicatively
/// (t0 + i*dt) so they never accumulate round-off drift.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t n_steps = 0;

  [[nodiscard]] double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
};

/// A (possibly controlled) SDE given as a drift/diffusion evaluator pair.
/// drift: (state, t) -> R^dim, diffusion: (state, t) -> dim x noise_dim.
struct SdeSystem {
  int dim = 0;
  int noise_dim = 0;
  std::function<Vec(const Vec&, double)> drift;
  std::function<Mat(const Vec&, double)> diffusion;
  Vec box_lo;  // admissible box used for probes and clamp accounting
  Vec box_hi;
};

/// Time-stamped state matrix plus the inputs and noise actually applied.
/// states has n_steps+1 rows; inputs / noises / noise_increments have
/// n_steps rows (zero rows when absent).
struct Trajectory {
  TimeGrid grid;
  Mat states;            // (n_steps+1) x dim
  Mat inputs;            // n_steps x dim
  Mat noises;            // n_steps x noise_dim, the raw xi draws
  Mat noise_increments;  // n_steps x dim, g(X_i,t_i)*sqrt(dt)*xi_i as applied

  [[nodiscard]] std::size_t n_steps() const {
    return states.rows() > 0 ? static_cast<std::size_t>(states.rows() - 1) : 0;
  }
  [[nodiscard]] int dim() const { return static_cast<int>(states.cols()); }
  [[nodiscard]] bool has_inputs() const { return inputs.rows() > 0; }
  [[nodiscard]] bool has_noises() const { return noises.rows() > 0; }

  /// Rebuilds noise_increments from the stored xi draws and a system
  /// (needed after loading a trajectory from CSV).
  void recompute_increments(const SdeSystem& sys);
};

/// Integration left the admissible range (or produced a non-finite state).
class BlowupError : public std::runtime_error {
 public:
  BlowupError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Per-step exogenous input source.
using InputSource = std::function<Vec(std::size_t step, double t)>;

/// One Euler-Maruyama update: x + [f(x,t) + u]*dt + g(x,t)*sqrt(dt)*xi.
/// Deterministic given its arguments; throws BlowupError if the result is
/// non-finite (step_index only labels the error message).
Vec euler_maruyama_step(const Vec& x, double t, const SdeSystem& sys, const Vec& u,
                        double dt, const Vec& xi, std::size_t step_index = 0);

struct SimulateOptions {
  const InputSource* input = nullptr;
  double blowup_bound = 1e6;
};

/// Integrates the system over the grid with a seeded Gaussian stream.
/// Same (seed, x0, inputs) gives a bit-identical trajectory; the xi draws
/// and the applied increments are recorded so every step can be replayed.
Trajectory simulate(const SdeSystem& sys, const Vec& x0, const TimeGrid& grid,
                    std::uint64_t seed, const SimulateOptions& opts = {});

/// Multiscale Van der Pol with additive noise:
///   dx = -y dt + sigma1 dW1,
///   dy = (1/eps)(y - y^3/3 + x) dt + (sigma2/sqrt(eps)) dW2.
SdeSystem vdp_additive(double eps, double sigma1, double sigma2);

/// Same drift with diffusion diag(sigma1*x, (sigma2/sqrt(eps))*y).
SdeSystem vdp_multiplicative(double eps, double sigma1, double sigma2);

struct PolynomialSdeOptions {
  double x_lo = -0.5;
  double x_hi = 0.5;
  double max_clamp_fraction = 0.01;  // reject if g^2 < 0 on more of the box
  int check_samples = 10001;
};

/// Fraction of evenly spaced points in [x_lo, x_hi] where theta2 . {1,x,x^2,x^3}
/// is negative (the diffusion clamps those to zero).
double polynomial_clamp_fraction(const Eigen::Vector4d& theta2,
                                 const PolynomialSdeOptions& opts = {});

/// 1-dim SDE with drift theta1 . {1,x,x^2,x^3} and diffusion
/// sqrt(max(0, theta2 . {1,x,x^2,x^3})). Throws std::invalid_argument if the
/// clamped fraction of the admissible interval exceeds the configured budget.
SdeSystem polynomial_sde(const Eigen::Vector4d& theta1, const Eigen::Vector4d& theta2,
                         const PolynomialSdeOptions& opts = {});

struct TimestepCheck {
  double max_spectral_norm = 0.0;
  bool ok = false;
};

/// Estimates the drift Jacobian by central differences (step 1e-6*(1+|x_j|))
/// at each probe state and checks dt < 1 / max spectral norm.
TimestepCheck check_timestep(const SdeSystem& sys, const std::vector<Vec>& probe_states,
                             double dt);

}  // namespace sngrc
