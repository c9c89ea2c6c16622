#pragma once

#include <span>
#include <vector>

#include "sngrc/types.hpp"

namespace sngrc {

/// Kramers-Moyal conditional-moment targets for a scalar series:
///   drift d_i = (x_{i+1} - x_i) / dt,
///   diff2 s_i = (x_{i+1} - x_i)^2 / dt.
struct KmEstimates {
  Vec x;      // states x_0 .. x_{m-2}
  Vec drift;  // m-1 drift targets
  Vec diff2;  // m-1 squared-diffusion targets, nonnegative by construction
  double dt = 0.0;
};

KmEstimates km_targets(const Vec& series, double dt);

/// Evaluation matrix of the polynomial basis {1, x, ..., x^degree}.
Mat polynomial_design(const Vec& x, int degree = 3);

struct LassoOptions {
  double tol = 1e-10;      // max coefficient change per sweep
  int max_sweeps = 10000;
  bool standardize = true;  // scale columns to unit variance internally
  bool record_objective = false;
};

struct LassoResult {
  Vec coef;
  bool converged = false;
  int sweeps = 0;
  std::vector<double> objective_per_sweep;  // filled when record_objective
};

/// Minimizes (1/2m)||y - D theta||^2 + lambda ||theta||_1 by cyclic
/// coordinate descent with soft thresholding. Columns are standardized to
/// unit variance internally (zero-variance columns are left unscaled) and
/// coefficients are mapped back. Lambda at or above max_j |D_j^T y| / m on
/// the standardized design gives the all-zero solution.
LassoResult lasso_fit(const Mat& design, const Vec& targets, double lambda,
                      const LassoOptions& opts = {});

/// Largest lambda with a nonzero solution (computed on the standardized
/// design, matching lasso_fit's internal convention).
double lasso_null_threshold(const Mat& design, const Vec& targets, bool standardize = true);

/// Sparse SDE identified from a scalar series: drift theta1 and squared
/// diffusion theta2 on the basis {1, x, x^2, x^3} (order fixed), with the
/// cross-validated lambda reused as a hard threshold.
struct SparseSdeFit {
  int degree = 3;
  Vec theta1;  // drift coefficients
  Vec theta2;  // squared-diffusion coefficients
  double alpha = 0.0;  // selected drift threshold
  double beta = 0.0;   // selected diffusion threshold
  std::vector<double> lambda_grid;
  std::vector<double> cv_drift;  // mean CV loss per lambda
  std::vector<double> cv_diff;
  bool drift_converged = true;
  bool diff_converged = true;
};

/// Cross-validates lambda separately for drift and diffusion over contiguous
/// blocks (time-ordered, no shuffling), refits on all data, and zeroes
/// coefficients below the selected value.
SparseSdeFit fit_sde(const Vec& series, double dt, std::span<const double> lambda_grid,
                     int kfolds = 5, int degree = 3);

/// 31 log-spaced lambda candidates from 1e-6 to 1.
std::vector<double> default_lambda_grid();

struct FitEvaluation {
  Vec drift_pred;
  Vec diff2_pred;
  double rmse_drift = 0.0;
  double rmse_diff = 0.0;
};

/// Pointwise predictions theta . basis(x_i) against the KM targets.
FitEvaluation evaluate_fit(const SparseSdeFit& fit, const KmEstimates& km);

}  // namespace sngrc
