#include "sngrc/controller.hpp"

#include <cmath>

#include "sngrc/rng.hpp"

namespace sngrc {

GainMatrix GainMatrix::make(const Mat& k) {
  if (k.rows() != k.cols()) throw std::invalid_argument("GainMatrix: K must be square");
  const Eigen::EigenSolver<Mat> eig(k, false);
  const double rho = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (rho >= 1.0 - 1e-10) {
    throw std::invalid_argument("GainMatrix: spectral radius " + std::to_string(rho) +
                                " violates rho(K) < 1");
  }
  return GainMatrix{k, rho};
}

GainMatrix GainMatrix::diagonal(int dim, double value) {
  return make(Mat::Identity(dim, dim) * value);
}

double DesiredTrajectory::factor_at(std::size_t i) const {
  double factor = 1.0;
  for (const auto& [step, f] : events) {
    if (step <= i) factor = f;
    else break;
  }
  return factor;
}

Vec DesiredTrajectory::state_at(std::size_t i) const {
  const Vec base = base_states.row(static_cast<Eigen::Index>(i)).transpose();
  return center + factor_at(i) * (base - center);
}

DesiredTrajectory make_desired(const Trajectory& base,
                               std::vector<std::pair<std::size_t, double>> events,
                               std::optional<Vec> center) {
  if (base.states.rows() == 0) throw std::invalid_argument("make_desired: empty base trajectory");
  const auto rows = static_cast<std::size_t>(base.states.rows());
  std::size_t prev = 0;
  bool first = true;
  for (const auto& [step, factor] : events) {
    if (!first && step <= prev) {
      throw std::invalid_argument("make_desired: trigger steps must be strictly increasing");
    }
    if (step >= rows) throw std::invalid_argument("make_desired: event beyond trajectory span");
    if (factor <= 0.0) throw std::invalid_argument("make_desired: factors must be positive");
    prev = step;
    first = false;
  }

  DesiredTrajectory des;
  des.grid = base.grid;
  des.base_states = base.states;
  des.events = std::move(events);
  if (center) {
    des.center = *center;
  } else {
    const auto tail_start = static_cast<Eigen::Index>(rows - rows * 8 / 10);
    des.center =
        base.states.bottomRows(base.states.rows() - tail_start).colwise().mean().transpose();
  }
  return des;
}

std::size_t nearest_base_index(const DesiredTrajectory& desired, const Vec& x) {
  Eigen::Index best = 0;
  (desired.base_states.rowwise() - x.transpose()).rowwise().squaredNorm().minCoeff(&best);
  return static_cast<std::size_t>(best);
}

bool static_trigger(const Vec& e, double threshold) {
  if (threshold <= 0.0) throw std::invalid_argument("static_trigger: threshold must be positive");
  return e.norm() >= threshold;
}

PerturbationSignal make_perturbation(int dim, std::size_t n_steps, double amplitude,
                                     std::size_t hold, std::uint64_t seed) {
  if (amplitude <= 0.0) throw std::invalid_argument("make_perturbation: amplitude must be > 0");
  if (hold < 1) throw std::invalid_argument("make_perturbation: hold must be >= 1");
  PerturbationSignal sig;
  sig.amplitude = amplitude;
  sig.hold = hold;
  sig.seed = seed;
  sig.u.resize(static_cast<Eigen::Index>(n_steps), dim);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const std::uint64_t block = i / hold;
    for (int j = 0; j < dim; ++j) {
      const double u01 =
          rng::uniform01(seed, rng::kPerturbBase + static_cast<std::uint32_t>(j), block);
      sig.u(static_cast<Eigen::Index>(i), j) = amplitude * (2.0 * u01 - 1.0);
    }
  }
  return sig;
}

InputSource input_from_matrix(Mat u) {
  return [m = std::move(u)](std::size_t step, double) -> Vec {
    return m.row(static_cast<Eigen::Index>(step)).transpose();
  };
}

namespace {

// Solver for W_u with the pseudo-inverse fallback the control law needs.
class WuSolver {
 public:
  explicit WuSolver(const Mat& wu)
      : svd_(wu, Eigen::ComputeThinU | Eigen::ComputeThinV) {
    const auto& sv = svd_.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    if (smax <= 0.0) {
      throw SingularMatrixError("control_input: W_u is zero / rank-deficient");
    }
    const double smin = sv[sv.size() - 1];
    ill_conditioned_ = smin <= 0.0 || smax / smin >= 1e8;
    svd_.setThreshold(1e-10);
  }

  [[nodiscard]] Vec solve(const Vec& rhs) const { return svd_.solve(rhs); }
  [[nodiscard]] bool ill_conditioned() const { return ill_conditioned_; }

 private:
  Eigen::JacobiSVD<Mat> svd_;
  bool ill_conditioned_ = false;
};

Vec control_bracket(const WeightBlocks& w, const Vec& o_x, const Vec& o_n,
                    const Vec& x_des_next, const Vec& e, const GainMatrix& k) {
  Vec bracket = x_des_next - w.w_x * o_x + k.k * e;
  if (w.w_n.size() > 0) bracket -= w.w_n * o_n;
  return bracket;
}

}  // namespace

ControlInput control_input(const WeightBlocks& w, const Vec& o_x, const Vec& o_n,
                           const Vec& x_des_next, const Vec& e, const GainMatrix& k) {
  const WuSolver solver(w.w_u);
  ControlInput out;
  out.u = solver.solve(control_bracket(w, o_x, o_n, x_des_next, e, k));
  out.used_pseudo_inverse = solver.ill_conditioned();
  return out;
}

ControlSummary summarize(const std::vector<ControlRecord>& records,
                         std::optional<std::size_t> diverged_at, bool wu_flag) {
  ControlSummary s;
  s.diverged_at = diverged_at;
  s.wu_ill_conditioned = wu_flag;
  if (records.empty()) return s;
  const int dim = static_cast<int>(records.front().e.size());
  s.per_component_rmse = Vec::Zero(dim);
  double sq = 0.0;
  for (const auto& r : records) {
    sq += r.e.squaredNorm();
    s.per_component_rmse += r.e.cwiseAbs2();
    s.max_abs_u = std::max(s.max_abs_u, r.u.cwiseAbs().maxCoeff());
    if (r.triggered) ++s.n_triggers;
  }
  const double n = static_cast<double>(records.size());
  s.total_rmse = std::sqrt(sq / (n * dim));
  s.per_component_rmse = (s.per_component_rmse / n).cwiseSqrt();
  return s;
}

namespace {

struct LoopState {
  Trajectory history;  // realized closed-loop states with delay-padded prefix
  std::vector<std::vector<int>> tuples;
  Vec o_x;

  LoopState(const FeatureConfig& cfg, const TimeGrid& grid, const Mat& init_states)
      : tuples(monomial_exponent_tuples(cfg.linear_count(), cfg.poly_degrees)) {
    const auto pad = static_cast<Eigen::Index>(cfg.delay);
    const auto steps = static_cast<Eigen::Index>(grid.n_steps);
    if (init_states.rows() != pad + 1 || init_states.cols() != cfg.state_dim) {
      throw std::invalid_argument("closed_loop_run: init_states must be (delay+1) x dim");
    }
    history.grid = grid;
    history.states = Mat::Zero(pad + steps + 1, cfg.state_dim);
    history.states.topRows(pad + 1) = init_states;
    history.inputs = Mat::Zero(pad + steps, cfg.state_dim);
    history.noise_increments = Mat::Zero(pad + steps, cfg.state_dim);
  }

  void fill_features(const FeatureConfig& cfg, std::size_t loop_step) {
    const std::size_t s = loop_step + static_cast<std::size_t>(cfg.delay);
    const int d = cfg.linear_count();
    Vec z(d);
    for (int lag = 0; lag <= cfg.delay; ++lag) {
      z.segment(lag * cfg.state_dim, cfg.state_dim) =
          history.states.row(static_cast<Eigen::Index>(s - static_cast<std::size_t>(lag)));
    }
    o_x.resize(static_cast<Eigen::Index>(cfg.state_feature_count()));
    std::size_t idx = 0;
    if (cfg.include_constant) o_x[static_cast<Eigen::Index>(idx++)] = 1.0;
    for (int j = 0; j < d; ++j) o_x[static_cast<Eigen::Index>(idx++)] = z[j];
    for (const auto& tuple : tuples) {
      double m = 1.0;
      for (int j : tuple) m *= z[j];
      o_x[static_cast<Eigen::Index>(idx++)] = m;
    }
  }
};

ControlLog run_loop(const WeightBlocks& w, const DesiredTrajectory& desired,
                    const GainMatrix& k, const TimeGrid& grid, std::uint64_t seed,
                    const ClosedLoopOptions& opts, const SdeSystem* plant,
                    double model_noise_scale) {
  const FeatureConfig& cfg = w.config;
  const std::size_t n_steps = grid.n_steps;
  if (desired.size() < n_steps + 1) {
    throw std::invalid_argument("closed_loop_run: desired trajectory does not cover the grid");
  }
  Mat init = opts.init_states;
  if (init.rows() == 0) {
    init = desired.state_at(0).transpose().replicate(cfg.delay + 1, 1);
  }

  LoopState loop(cfg, grid, init);
  const WuSolver solver(w.w_u);
  const bool stochastic = w.w_n.size() > 0;
  const double sqrt_dt = std::sqrt(grid.dt);
  const int noise_dim = plant ? plant->noise_dim : cfg.state_dim;

  ControlLog log;
  log.records.reserve(n_steps);
  std::optional<std::size_t> diverged_at;
  Vec predicted;  // model prediction of the current state, for Residual policy
  bool have_prediction = false;

  for (std::size_t i = 0; i < n_steps; ++i) {
    const std::size_t s = i + static_cast<std::size_t>(cfg.delay);
    const double t = grid.time(i);
    const Vec x = loop.history.states.row(static_cast<Eigen::Index>(s)).transpose();
    const Vec x_des = desired.state_at(i);
    const Vec e = x - x_des;

    // Draw this step's noise up front so the Oracle policy can expose it.
    Vec xi(noise_dim);
    for (int j = 0; j < noise_dim; ++j) {
      const std::uint32_t sub = plant ? rng::kNoiseBase + static_cast<std::uint32_t>(j)
                                      : rng::kModelNoise + static_cast<std::uint32_t>(j);
      xi[j] = rng::standard_normal(seed, sub, i);
    }
    Vec applied_increment;
    if (plant) {
      applied_increment = plant->diffusion(x, t) * (sqrt_dt * xi);
    } else {
      applied_increment = model_noise_scale * xi;
    }

    Vec o_n = Vec::Zero(stochastic ? cfg.noise_dim : 0);
    if (stochastic) {
      switch (opts.policy) {
        case NoisePolicy::Zero:
          break;
        case NoisePolicy::Oracle:
          o_n = applied_increment;
          break;
        case NoisePolicy::Residual:
          if (have_prediction) {
            // Innovation x - x_hat estimates W_n o_n of the previous step's
            // unmodeled noise; map it back through W_n.
            o_n = w.w_n.completeOrthogonalDecomposition().solve(x - predicted);
          }
          break;
      }
    }

    loop.fill_features(cfg, i);
    const Vec bracket = control_bracket(w, loop.o_x, o_n, desired.state_at(i + 1), e, k);
    const Vec u = solver.solve(bracket);

    ControlRecord rec;
    rec.t = t;
    rec.x = x;
    rec.x_des = x_des;
    rec.u = u;
    rec.o_n = o_n;
    rec.e = e;
    rec.triggered = static_trigger(e, opts.trigger_threshold);
    log.records.push_back(std::move(rec));

    // Advance the plant (or the model itself) one step.
    Vec next;
    bool blew_up = false;
    if (plant) {
      const Vec f = plant->drift(x, t);
      next = x + (f + u) * grid.dt + applied_increment;
      if (!next.allFinite() || next.cwiseAbs().maxCoeff() > opts.blowup_bound) {
        blew_up = true;
      }
    } else {
      FeatureVector fv;
      fv.o_x = loop.o_x;
      fv.o_u = u;
      fv.o_n = stochastic ? applied_increment : Vec(0);
      next = predict_step(w, fv);
      if (!next.allFinite() || next.cwiseAbs().maxCoeff() > opts.blowup_bound) blew_up = true;
    }

    if (blew_up) {
      diverged_at = i;
      break;
    }

    if (stochastic && opts.policy == NoisePolicy::Residual) {
      FeatureVector fv;
      fv.o_x = loop.o_x;
      fv.o_u = u;
      fv.o_n = o_n;
      predicted = predict_step(w, fv);
      have_prediction = true;
    }

    loop.history.inputs.row(static_cast<Eigen::Index>(s)) = u.transpose();
    loop.history.noise_increments.row(static_cast<Eigen::Index>(s)) = applied_increment.transpose();
    loop.history.states.row(static_cast<Eigen::Index>(s + 1)) = next.transpose();
  }

  log.summary = summarize(log.records, diverged_at, solver.ill_conditioned());
  return log;
}

}  // namespace

ControlLog closed_loop_run(const SdeSystem& plant, const WeightBlocks& w,
                           const DesiredTrajectory& desired, const GainMatrix& k,
                           const TimeGrid& grid, std::uint64_t seed,
                           const ClosedLoopOptions& opts) {
  if (plant.dim != w.config.state_dim) {
    throw std::invalid_argument("closed_loop_run: plant dimension does not match weights");
  }
  return run_loop(w, desired, k, grid, seed, opts, &plant, 0.0);
}

ControlLog closed_loop_model_run(const WeightBlocks& w, const DesiredTrajectory& desired,
                                 const GainMatrix& k, const TimeGrid& grid,
                                 std::uint64_t seed, double noise_scale,
                                 const ClosedLoopOptions& opts) {
  return run_loop(w, desired, k, grid, seed, opts, nullptr, noise_scale);
}

}  // namespace sngrc
