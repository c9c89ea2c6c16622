#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sngrc/sde.hpp"
#include "sngrc/types.hpp"

namespace sngrc {

/// Recipe for the NG-RC feature map. The state block O_X is
///   [constant?, X_i, X_{i-1}, ..., X_{i-delay}, monomials]
/// where the monomials span the whole delay-embedded linear block, one group
/// per degree in poly_degrees, each group in graded-lexicographic order
/// (non-decreasing index tuples). include_noise_features selects the
/// stochastic variant; false gives the conventional baseline.
struct FeatureConfig {
  int state_dim = 2;
  int delay = 1;
  std::vector<int> poly_degrees = {2, 3};
  bool include_constant = true;
  bool include_noise_features = true;
  int noise_dim = 2;

  [[nodiscard]] int linear_count() const { return state_dim * (delay + 1); }
  [[nodiscard]] std::size_t state_feature_count() const;
  [[nodiscard]] std::size_t total_feature_count() const;
};

/// Monomials with repetition over d variables: for each degree (in the given
/// order) all non-decreasing index tuples in lexicographic order.
std::vector<std::vector<int>> monomial_exponent_tuples(int d, std::span<const int> degrees);

/// Number of degree-p monomials over d variables, C(d+p-1, p).
std::size_t monomial_count(int d, int p);

struct FeatureVector {
  Vec o_x;
  Vec o_u;
  Vec o_n;  // empty in conventional mode

  [[nodiscard]] Vec concat() const;
};

class InsufficientHistoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Features at step i of a trajectory. Requires i >= delay; o_u is the input
/// applied at step i and o_n the realized stochastic increment at step i.
FeatureVector build_features(const Trajectory& traj, std::size_t i, const FeatureConfig& config);

struct DesignMatrices {
  Mat features;  // total_feature_count x K'
  Mat targets;   // state_dim x K'
};

/// Column j holds the features at step j+delay, its target the state at step
/// j+delay+1; K' = n_steps - delay. Columns are filled in parallel.
DesignMatrices assemble_design(const Trajectory& traj, const FeatureConfig& config);

/// Serial reference implementation kept for testing the parallel kernel.
DesignMatrices assemble_design_reference(const Trajectory& traj, const FeatureConfig& config);

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trained output weights, partitioned to match the O_total block layout.
struct WeightBlocks {
  Mat w_x;  // state_dim x |O_X|
  Mat w_u;  // state_dim x state_dim
  Mat w_n;  // state_dim x noise_dim, 0x0 in conventional mode
  double alpha = 0.0;
  FeatureConfig config;
  double normal_eq_residual = 0.0;  // relative residual of the fit

  [[nodiscard]] Mat full() const;
  static WeightBlocks from_full(const Mat& w, double alpha, const FeatureConfig& config);
};

/// Tikhonov solution W = X O^T (O O^T + alpha I)^-1 via an LDLT
/// factorization of the Gram matrix. With alpha = 0 the Gram matrix must be
/// numerically invertible (condition number below 1e12).
WeightBlocks ridge_fit(const Mat& features, const Mat& targets, double alpha,
                       const FeatureConfig& config);

/// One-step prediction W_X o_x + W_u o_u [+ W_n o_n].
Vec predict_step(const WeightBlocks& w, const FeatureVector& fv);

struct AlphaSelection {
  double best_alpha = 0.0;
  std::vector<double> alphas;
  std::vector<double> validation_rmse;
};

/// Grid search over alpha with a time-ordered train/holdout split (leading
/// fraction trains, trailing fraction scores one-step RMSE). Ties go to the
/// larger alpha.
AlphaSelection select_alpha(const Mat& features, const Mat& targets,
                            std::span<const double> alpha_grid, double holdout_fraction,
                            const FeatureConfig& config);

/// 45 log-spaced candidates from 1e-10 to 1e1.
std::vector<double> default_alpha_grid();

}  // namespace sngrc
