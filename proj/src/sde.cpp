#include "sngrc/sde.hpp"

#include <cmath>
#include <string>

#include "sngrc/rng.hpp"

namespace sngrc {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

std::string step_message(const char* what, std::size_t step) {
  return std::string(what) + " at step " + std::to_string(step);
}

}  // namespace

void Trajectory::recompute_increments(const SdeSystem& sys) {
  const std::size_t k = n_steps();
  noise_increments.resize(static_cast<Eigen::Index>(k), sys.dim);
  const double sqrt_dt = std::sqrt(grid.dt);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec x = states.row(static_cast<Eigen::Index>(i)).transpose();
    const Mat g = sys.diffusion(x, grid.time(i));
    const Vec xi = noises.row(static_cast<Eigen::Index>(i)).transpose();
    noise_increments.row(static_cast<Eigen::Index>(i)) = (g * (sqrt_dt * xi)).transpose();
  }
}

Vec euler_maruyama_step(const Vec& x, double t, const SdeSystem& sys, const Vec& u,
                        double dt, const Vec& xi, std::size_t step_index) {
  const Vec f = sys.drift(x, t);
  const Mat g = sys.diffusion(x, t);
  const Vec next = x + (f + u) * dt + g * (std::sqrt(dt) * xi);
  if (!all_finite(next)) {
    throw BlowupError(step_index, step_message("non-finite Euler-Maruyama update", step_index));
  }
  return next;
}

Trajectory simulate(const SdeSystem& sys, const Vec& x0, const TimeGrid& grid,
                    std::uint64_t seed, const SimulateOptions& opts) {
  const std::size_t k = grid.n_steps;
  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(static_cast<Eigen::Index>(k + 1), sys.dim);
  traj.inputs = Mat::Zero(static_cast<Eigen::Index>(k), sys.dim);
  traj.noises.resize(static_cast<Eigen::Index>(k), sys.noise_dim);
  traj.noise_increments.resize(static_cast<Eigen::Index>(k), sys.dim);
  traj.states.row(0) = x0.transpose();

  const double sqrt_dt = std::sqrt(grid.dt);
  Vec x = x0;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = grid.time(i);
    Vec u = Vec::Zero(sys.dim);
    if (opts.input) u = (*opts.input)(i, t);

    Vec xi(sys.noise_dim);
    for (int j = 0; j < sys.noise_dim; ++j) {
      xi[j] = rng::standard_normal(seed, rng::kNoiseBase + static_cast<std::uint32_t>(j), i);
    }

    const Vec f = sys.drift(x, t);
    const Mat g = sys.diffusion(x, t);
    const Vec increment = g * (sqrt_dt * xi);
    const Vec next = x + (f + u) * grid.dt + increment;

    if (!all_finite(next) || next.cwiseAbs().maxCoeff() > opts.blowup_bound) {
      throw BlowupError(i, step_message("state left the admissible range", i));
    }

    traj.inputs.row(static_cast<Eigen::Index>(i)) = u.transpose();
    traj.noises.row(static_cast<Eigen::Index>(i)) = xi.transpose();
    traj.noise_increments.row(static_cast<Eigen::Index>(i)) = increment.transpose();
    traj.states.row(static_cast<Eigen::Index>(i + 1)) = next.transpose();
    x = next;
  }
  return traj;
}

SdeSystem vdp_additive(double eps, double sigma1, double sigma2) {
  if (eps <= 0.0) throw std::invalid_argument("vdp_additive: eps must be positive");
  SdeSystem sys;
  sys.dim = 2;
  sys.noise_dim = 2;
  sys.box_lo = Vec::Constant(2, -3.0);
  sys.box_hi = Vec::Constant(2, 3.0);
  sys.drift = [eps](const Vec& s, double) {
    Vec f(2);
    f[0] = -s[1];
    f[1] = (s[1] - s[1] * s[1] * s[1] / 3.0 + s[0]) / eps;
    return f;
  };
  const double g22 = sigma2 / std::sqrt(eps);
  sys.diffusion = [sigma1, g22](const Vec&, double) {
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = sigma1;
    g(1, 1) = g22;
    return g;
  };
  return sys;
}

SdeSystem vdp_multiplicative(double eps, double sigma1, double sigma2) {
  if (eps <= 0.0) throw std::invalid_argument("vdp_multiplicative: eps must be positive");
  SdeSystem sys = vdp_additive(eps, sigma1, sigma2);
  const double fast_scale = sigma2 / std::sqrt(eps);
  sys.diffusion = [sigma1, fast_scale](const Vec& s, double) {
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = sigma1 * s[0];
    g(1, 1) = fast_scale * s[1];
    return g;
  };
  return sys;
}

namespace {

inline double poly4(const Eigen::Vector4d& theta, double x) {
  return theta[0] + x * (theta[1] + x * (theta[2] + x * theta[3]));
}

}  // namespace

double polynomial_clamp_fraction(const Eigen::Vector4d& theta2,
                                 const PolynomialSdeOptions& opts) {
  int clamped = 0;
  const int n = opts.check_samples;
  for (int i = 0; i < n; ++i) {
    const double x = opts.x_lo + (opts.x_hi - opts.x_lo) * static_cast<double>(i) /
                                     static_cast<double>(n - 1);
    if (poly4(theta2, x) < 0.0) ++clamped;
  }
  return static_cast<double>(clamped) / static_cast<double>(n);
}

SdeSystem polynomial_sde(const Eigen::Vector4d& theta1, const Eigen::Vector4d& theta2,
                         const PolynomialSdeOptions& opts) {
  const double frac = polynomial_clamp_fraction(theta2, opts);
  if (frac > opts.max_clamp_fraction) {
    throw std::invalid_argument(
        "polynomial_sde: g^2 negative on " + std::to_string(100.0 * frac) +
        "% of the admissible interval (budget " +
        std::to_string(100.0 * opts.max_clamp_fraction) + "%)");
  }
  SdeSystem sys;
  sys.dim = 1;
  sys.noise_dim = 1;
  sys.box_lo = Vec::Constant(1, opts.x_lo);
  sys.box_hi = Vec::Constant(1, opts.x_hi);
  sys.drift = [theta1](const Vec& s, double) {
    Vec f(1);
    f[0] = poly4(theta1, s[0]);
    return f;
  };
  sys.diffusion = [theta2](const Vec& s, double) {
    Mat g(1, 1);
    g(0, 0) = std::sqrt(std::max(0.0, poly4(theta2, s[0])));
    return g;
  };
  return sys;
}

TimestepCheck check_timestep(const SdeSystem& sys, const std::vector<Vec>& probe_states,
                             double dt) {
  TimestepCheck res;
  for (const Vec& x : probe_states) {
    Mat jac(sys.dim, sys.dim);
    for (int j = 0; j < sys.dim; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x[j]));
      Vec xp = x;
      Vec xm = x;
      xp[j] += h;
      xm[j] -= h;
      jac.col(j) = (sys.drift(xp, 0.0) - sys.drift(xm, 0.0)) / (2.0 * h);
    }
    const double norm = jac.jacobiSvd().singularValues()[0];
    res.max_spectral_norm = std::max(res.max_spectral_norm, norm);
  }
  res.ok = res.max_spectral_norm == 0.0 || dt < 1.0 / res.max_spectral_norm;
  return res;
}

}  // namespace sngrc
