#include "sngrc/sysid.hpp"

#include <cmath>
#include <stdexcept>

namespace sngrc {

KmEstimates km_targets(const Vec& series, double dt) {
  if (series.size() < 2) throw std::invalid_argument("km_targets: need at least 2 samples");
  if (dt <= 0.0) throw std::invalid_argument("km_targets: dt must be positive");
  const Eigen::Index m = series.size() - 1;
  KmEstimates km;
  km.dt = dt;
  km.x = series.head(m);
  const Vec dx = series.tail(m) - series.head(m);
  km.drift = dx / dt;
  km.diff2 = dx.cwiseAbs2() / dt;
  return km;
}

Mat polynomial_design(const Vec& x, int degree) {
  Mat d(x.size(), degree + 1);
  d.col(0).setOnes();
  for (int p = 1; p <= degree; ++p) d.col(p) = d.col(p - 1).cwiseProduct(x);
  return d;
}

namespace {

Vec column_scales(const Mat& design, bool standardize) {
  const auto n = static_cast<double>(design.rows());
  Vec scale = Vec::Ones(design.cols());
  if (!standardize) return scale;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    const double mean = design.col(j).mean();
    const double var = design.col(j).cwiseAbs2().sum() / n - mean * mean;
    if (var > 0.0) scale[j] = std::sqrt(var);
  }
  return scale;
}

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace

double lasso_null_threshold(const Mat& design, const Vec& targets, bool standardize) {
  const Vec scale = column_scales(design, standardize);
  const auto m = static_cast<double>(design.rows());
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    lmax = std::max(lmax, std::abs(design.col(j).dot(targets) / scale[j]) / m);
  }
  return lmax;
}

LassoResult lasso_fit(const Mat& design, const Vec& targets, double lambda,
                      const LassoOptions& opts) {
  if (lambda < 0.0) throw std::invalid_argument("lasso_fit: lambda must be >= 0");
  if (design.rows() != targets.size()) {
    throw std::invalid_argument("lasso_fit: design/target row counts differ");
  }
  const Eigen::Index m = design.rows();
  const Eigen::Index p = design.cols();
  const double md = static_cast<double>(m);

  const Vec scale = column_scales(design, opts.standardize);
  Mat d = design;
  for (Eigen::Index j = 0; j < p; ++j) d.col(j) /= scale[j];

  const Vec col_sq = d.cwiseAbs2().colwise().sum().transpose() / md;  // a_j
  Vec theta = Vec::Zero(p);
  Vec residual = targets;  // y - D theta

  LassoResult res;
  for (res.sweeps = 0; res.sweeps < opts.max_sweeps; ++res.sweeps) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq[j] == 0.0) continue;
      const double old = theta[j];
      // Partial residual correlation with column j, then soft threshold.
      const double rho = d.col(j).dot(residual) / md + col_sq[j] * old;
      const double updated = soft_threshold(rho, lambda) / col_sq[j];
      if (updated != old) {
        residual -= (updated - old) * d.col(j);
        theta[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (opts.record_objective) {
      const double obj = residual.squaredNorm() / (2.0 * md) + lambda * theta.lpNorm<1>();
      res.objective_per_sweep.push_back(obj);
    }
    if (max_change < opts.tol) {
      res.converged = true;
      ++res.sweeps;
      break;
    }
  }

  res.coef = theta.cwiseQuotient(scale);
  return res;
}

namespace {

struct CvCurve {
  std::vector<double> losses;
  double best_lambda = 0.0;
};

CvCurve cross_validate(const Mat& design, const Vec& targets,
                       std::span<const double> grid, int kfolds) {
  const Eigen::Index m = design.rows();
  CvCurve curve;
  curve.losses.assign(grid.size(), 0.0);

  // Contiguous blocks (time-ordered series; no shuffling).
  std::vector<std::pair<Eigen::Index, Eigen::Index>> folds;
  for (int k = 0; k < kfolds; ++k) {
    const Eigen::Index lo = m * k / kfolds;
    const Eigen::Index hi = m * (k + 1) / kfolds;
    if (hi > lo) folds.emplace_back(lo, hi);
  }

  std::vector<std::vector<double>> fold_losses(folds.size(),
                                               std::vector<double>(grid.size(), 0.0));
#pragma omp parallel for schedule(dynamic)
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto [lo, hi] = folds[f];
    const Eigen::Index n_val = hi - lo;
    const Eigen::Index n_train = m - n_val;
    Mat d_train(n_train, design.cols());
    Vec y_train(n_train);
    d_train.topRows(lo) = design.topRows(lo);
    y_train.head(lo) = targets.head(lo);
    d_train.bottomRows(m - hi) = design.bottomRows(m - hi);
    y_train.tail(m - hi) = targets.tail(m - hi);
    const Mat d_val = design.middleRows(lo, n_val);
    const Vec y_val = targets.segment(lo, n_val);

    for (std::size_t g = 0; g < grid.size(); ++g) {
      const LassoResult fit = lasso_fit(d_train, y_train, grid[g]);
      fold_losses[f][g] =
          (d_val * fit.coef - y_val).squaredNorm() / static_cast<double>(n_val);
    }
  }

  // Merge deterministically by fold index.
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t g = 0; g < grid.size(); ++g) curve.losses[g] += fold_losses[f][g];
  }
  for (auto& l : curve.losses) l /= static_cast<double>(folds.size());

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (curve.losses[g] < best || (curve.losses[g] == best && grid[g] > curve.best_lambda)) {
      best = curve.losses[g];
      curve.best_lambda = grid[g];
    }
  }
  return curve;
}

Vec hard_threshold(Vec coef, double threshold) {
  for (Eigen::Index j = 0; j < coef.size(); ++j) {
    if (std::abs(coef[j]) < threshold) coef[j] = 0.0;
  }
  return coef;
}

}  // namespace

SparseSdeFit fit_sde(const Vec& series, double dt, std::span<const double> lambda_grid,
                     int kfolds, int degree) {
  if (kfolds < 2) throw std::invalid_argument("fit_sde: kfolds must be >= 2");
  if (lambda_grid.empty()) throw std::invalid_argument("fit_sde: empty lambda grid");

  const KmEstimates km = km_targets(series, dt);
  const Mat design = polynomial_design(km.x, degree);

  SparseSdeFit fit;
  fit.degree = degree;
  fit.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());

  const CvCurve drift_cv = cross_validate(design, km.drift, lambda_grid, kfolds);
  const CvCurve diff_cv = cross_validate(design, km.diff2, lambda_grid, kfolds);
  fit.cv_drift = drift_cv.losses;
  fit.cv_diff = diff_cv.losses;
  fit.alpha = drift_cv.best_lambda;
  fit.beta = diff_cv.best_lambda;

  const LassoResult drift_fit = lasso_fit(design, km.drift, fit.alpha);
  const LassoResult diff_fit = lasso_fit(design, km.diff2, fit.beta);
  fit.drift_converged = drift_fit.converged;
  fit.diff_converged = diff_fit.converged;

  // The selected lambda doubles as the post-fit hard threshold.
  fit.theta1 = hard_threshold(drift_fit.coef, fit.alpha);
  fit.theta2 = hard_threshold(diff_fit.coef, fit.beta);
  return fit;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(31);
  for (int i = 0; i < 31; ++i) {
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, -6.0 + 6.0 * i / 30.0);
  }
  return grid;
}

FitEvaluation evaluate_fit(const SparseSdeFit& fit, const KmEstimates& km) {
  const Mat design = polynomial_design(km.x, fit.degree);
  FitEvaluation ev;
  ev.drift_pred = design * fit.theta1;
  ev.diff2_pred = design * fit.theta2;
  const auto n = static_cast<double>(km.x.size());
  ev.rmse_drift = std::sqrt((ev.drift_pred - km.drift).squaredNorm() / n);
  ev.rmse_diff = std::sqrt((ev.diff2_pred - km.diff2).squaredNorm() / n);
  return ev;
}

}  // namespace sngrc
