#include "sngrc/features.hpp"

#include <cmath>

namespace sngrc {

std::size_t monomial_count(int d, int p) {
  // C(d+p-1, p) without overflow for the small d, p used here.
  std::size_t num = 1;
  for (int i = 0; i < p; ++i) {
    num = num * static_cast<std::size_t>(d + p - 1 - i) / static_cast<std::size_t>(i + 1);
  }
  return num;
}

std::size_t FeatureConfig::state_feature_count() const {
  std::size_t count = include_constant ? 1 : 0;
  count += static_cast<std::size_t>(linear_count());
  for (int p : poly_degrees) count += monomial_count(linear_count(), p);
  return count;
}

std::size_t FeatureConfig::total_feature_count() const {
  std::size_t count = state_feature_count() + static_cast<std::size_t>(state_dim);
  if (include_noise_features) count += static_cast<std::size_t>(noise_dim);
  return count;
}

std::vector<std::vector<int>> monomial_exponent_tuples(int d, std::span<const int> degrees) {
  std::vector<std::vector<int>> tuples;
  for (int p : degrees) {
    // Non-decreasing index tuples of length p, lexicographic order.
    std::vector<int> idx(static_cast<std::size_t>(p), 0);
    while (true) {
      tuples.push_back(idx);
      int pos = p - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == d - 1) --pos;
      if (pos < 0) break;
      const int next = idx[static_cast<std::size_t>(pos)] + 1;
      for (int q = pos; q < p; ++q) idx[static_cast<std::size_t>(q)] = next;
    }
  }
  return tuples;
}

Vec FeatureVector::concat() const {
  Vec out(o_x.size() + o_u.size() + o_n.size());
  out << o_x, o_u, o_n;
  return out;
}

namespace {

// Shared per-trajectory feature context so the monomial tuples are built once.
struct FeaturePlan {
  FeatureConfig config;
  std::vector<std::vector<int>> tuples;

  explicit FeaturePlan(const FeatureConfig& cfg)
      : config(cfg), tuples(monomial_exponent_tuples(cfg.linear_count(), cfg.poly_degrees)) {}

  void fill_state_block(const Trajectory& traj, std::size_t i, double* out) const {
    const int d = config.linear_count();
    Eigen::VectorXd z(d);
    for (int lag = 0; lag <= config.delay; ++lag) {
      z.segment(lag * config.state_dim, config.state_dim) =
          traj.states.row(static_cast<Eigen::Index>(i - static_cast<std::size_t>(lag)));
    }
    std::size_t k = 0;
    if (config.include_constant) out[k++] = 1.0;
    for (int j = 0; j < d; ++j) out[k++] = z[j];
    for (const auto& tuple : tuples) {
      double m = 1.0;
      for (int j : tuple) m *= z[j];
      out[k++] = m;
    }
  }
};

void check_history(const Trajectory& traj, std::size_t i, const FeatureConfig& config) {
  if (i < static_cast<std::size_t>(config.delay)) {
    throw InsufficientHistoryError("build_features: step " + std::to_string(i) +
                                   " has fewer than delay=" + std::to_string(config.delay) +
                                   " past states");
  }
  if (i >= traj.n_steps() && traj.n_steps() > 0) {
    throw std::out_of_range("build_features: step index beyond trajectory inputs");
  }
  if (!traj.has_inputs()) {
    throw std::invalid_argument("build_features: trajectory carries no inputs");
  }
  if (config.include_noise_features && traj.noise_increments.rows() == 0) {
    throw std::invalid_argument("build_features: trajectory carries no noise increments");
  }
}

}  // namespace

FeatureVector build_features(const Trajectory& traj, std::size_t i, const FeatureConfig& config) {
  check_history(traj, i, config);
  const FeaturePlan plan(config);
  FeatureVector fv;
  fv.o_x.resize(static_cast<Eigen::Index>(config.state_feature_count()));
  plan.fill_state_block(traj, i, fv.o_x.data());
  fv.o_u = traj.inputs.row(static_cast<Eigen::Index>(i)).transpose();
  if (config.include_noise_features) {
    fv.o_n = traj.noise_increments.row(static_cast<Eigen::Index>(i)).transpose();
  } else {
    fv.o_n.resize(0);
  }
  return fv;
}

namespace {

DesignMatrices assemble_design_impl(const Trajectory& traj, const FeatureConfig& config,
                                    bool parallel) {
  if (traj.n_steps() <= static_cast<std::size_t>(config.delay)) {
    throw std::invalid_argument("assemble_design: trajectory shorter than delay+1 steps");
  }
  check_history(traj, static_cast<std::size_t>(config.delay), config);

  const FeaturePlan plan(config);
  const std::size_t n_state = config.state_feature_count();
  const std::size_t n_total = config.total_feature_count();
  const auto columns = static_cast<Eigen::Index>(traj.n_steps() - static_cast<std::size_t>(config.delay));

  DesignMatrices out;
  out.features.resize(static_cast<Eigen::Index>(n_total), columns);
  out.targets.resize(config.state_dim, columns);

  const auto fill_column = [&](Eigen::Index j) {
    const std::size_t i = static_cast<std::size_t>(j) + static_cast<std::size_t>(config.delay);
    double* col = out.features.col(j).data();
    plan.fill_state_block(traj, i, col);
    std::size_t k = n_state;
    for (int c = 0; c < config.state_dim; ++c) {
      col[k++] = traj.inputs(static_cast<Eigen::Index>(i), c);
    }
    if (config.include_noise_features) {
      for (int c = 0; c < config.noise_dim; ++c) {
        col[k++] = traj.noise_increments(static_cast<Eigen::Index>(i), c);
      }
    }
    out.targets.col(j) = traj.states.row(static_cast<Eigen::Index>(i + 1)).transpose();
  };

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < columns; ++j) fill_column(j);
  } else {
    for (Eigen::Index j = 0; j < columns; ++j) fill_column(j);
  }
  return out;
}

}  // namespace

DesignMatrices assemble_design(const Trajectory& traj, const FeatureConfig& config) {
  return assemble_design_impl(traj, config, true);
}

DesignMatrices assemble_design_reference(const Trajectory& traj, const FeatureConfig& config) {
  return assemble_design_impl(traj, config, false);
}

Mat WeightBlocks::full() const {
  Mat w(w_x.rows(), w_x.cols() + w_u.cols() + w_n.cols());
  if (w_n.size() > 0) {
    w << w_x, w_u, w_n;
  } else {
    w << w_x, w_u;
  }
  return w;
}

WeightBlocks WeightBlocks::from_full(const Mat& w, double alpha, const FeatureConfig& config) {
  WeightBlocks blocks;
  blocks.alpha = alpha;
  blocks.config = config;
  const auto n_state = static_cast<Eigen::Index>(config.state_feature_count());
  blocks.w_x = w.leftCols(n_state);
  blocks.w_u = w.middleCols(n_state, config.state_dim);
  if (config.include_noise_features) {
    blocks.w_n = w.rightCols(config.noise_dim);
  } else {
    blocks.w_n.resize(0, 0);
  }
  return blocks;
}

WeightBlocks ridge_fit(const Mat& features, const Mat& targets, double alpha,
                       const FeatureConfig& config) {
  if (alpha < 0.0) throw std::invalid_argument("ridge_fit: alpha must be >= 0");
  if (features.cols() != targets.cols()) {
    throw std::invalid_argument("ridge_fit: feature/target sample counts differ");
  }
  Mat gram = features * features.transpose();
  gram.diagonal().array() += alpha;

  if (alpha == 0.0) {
    const Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > 1e12) {
      throw SingularMatrixError("ridge_fit: Gram matrix is rank-deficient and alpha is 0");
    }
  }

  const Mat rhs = features * targets.transpose();  // p x n
  const Mat wt = gram.ldlt().solve(rhs);
  Mat w = wt.transpose();

  WeightBlocks blocks = WeightBlocks::from_full(w, alpha, config);
  const double rhs_norm = rhs.norm();
  blocks.normal_eq_residual =
      rhs_norm > 0.0 ? (w * gram - rhs.transpose()).norm() / rhs_norm : 0.0;
  return blocks;
}

Vec predict_step(const WeightBlocks& w, const FeatureVector& fv) {
  if (fv.o_x.size() != w.w_x.cols() || fv.o_u.size() != w.w_u.cols() ||
      fv.o_n.size() != w.w_n.cols()) {
    throw std::invalid_argument("predict_step: feature blocks do not match weights");
  }
  Vec out = w.w_x * fv.o_x + w.w_u * fv.o_u;
  if (w.w_n.size() > 0) out += w.w_n * fv.o_n;
  return out;
}

AlphaSelection select_alpha(const Mat& features, const Mat& targets,
                            std::span<const double> alpha_grid, double holdout_fraction,
                            const FeatureConfig& config) {
  if (alpha_grid.empty()) throw std::invalid_argument("select_alpha: empty grid");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw std::invalid_argument("select_alpha: holdout_fraction must be in (0,1)");
  }
  const Eigen::Index total = features.cols();
  const Eigen::Index n_hold =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(holdout_fraction * static_cast<double>(total))));
  const Eigen::Index n_train = total - n_hold;
  if (n_train < 1) throw std::invalid_argument("select_alpha: not enough training samples");

  const Mat o_train = features.leftCols(n_train);
  const Mat x_train = targets.leftCols(n_train);
  const Mat o_hold = features.rightCols(n_hold);
  const Mat x_hold = targets.rightCols(n_hold);

  AlphaSelection sel;
  sel.alphas.assign(alpha_grid.begin(), alpha_grid.end());
  sel.validation_rmse.resize(sel.alphas.size());

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < sel.alphas.size(); ++a) {
    const WeightBlocks w = ridge_fit(o_train, x_train, sel.alphas[a], config);
    const Mat pred = w.full() * o_hold;
    const double rmse = std::sqrt((pred - x_hold).squaredNorm() /
                                  static_cast<double>(x_hold.size()));
    sel.validation_rmse[a] = rmse;
    if (rmse < best || (rmse == best && sel.alphas[a] > sel.best_alpha)) {
      best = rmse;
      sel.best_alpha = sel.alphas[a];
    }
  }
  return sel;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid(45);
  for (int i = 0; i < 45; ++i) {
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, -10.0 + 11.0 * i / 44.0);
  }
  return grid;
}

}  // namespace sngrc
