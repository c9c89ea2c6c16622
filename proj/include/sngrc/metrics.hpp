#pragma once

#include <cstdint>
#include <vector>

#include "sngrc/controller.hpp"
#include "sngrc/types.hpp"

namespace sngrc {

/// RMSE over a [begin, end) window of a control log:
/// total^2 = mean over steps x components of squared error.
struct RmseReport {
  double total = 0.0;
  Vec per_component;
  std::size_t begin = 0;
  std::size_t end = 0;
};

RmseReport rmse(const ControlLog& log, std::size_t begin, std::size_t end);

/// Gaussian-kernel density estimate on a grid.
struct DensityEstimate {
  Vec grid;
  Vec density;
  double bandwidth = 0.0;
  std::size_t n_samples = 0;
  bool degenerate = false;  // zero-variance samples, spike fallback used
};

/// Silverman rule h = 0.9 * min(std, IQR/1.34) * N^(-1/5).
double silverman_bandwidth(const Vec& samples);

/// Evaluates the KDE over the grid (parallel over grid points).
DensityEstimate kde(const Vec& samples, const Vec& grid, double bandwidth);

/// Serial reference implementation kept for testing the parallel kernel.
DensityEstimate kde_reference(const Vec& samples, const Vec& grid, double bandwidth);

/// Default grid: `points` values spanning the samples +- 3 bandwidths.
Vec default_kde_grid(const Vec& samples, double bandwidth, int points = 512);

/// Convenience: Silverman bandwidth + default grid (degenerate samples fall
/// back to a narrow spike and set the flag).
DensityEstimate kde_auto(const Vec& samples, int points = 512);

double trapezoid(const Vec& grid, const Vec& values);

/// Interquartile range of the estimated density (quantiles of the
/// trapezoid-integrated CDF).
double density_iqr(const DensityEstimate& d);

/// One cell of the sigma x eps robustness grid. Diverged runs are counted
/// and excluded from the medians; both median and mean are kept.
struct SweepCell {
  double sigma = 0.0;
  double eps = 0.0;
  double median_total = 0.0;
  double median_x = 0.0;
  double median_y = 0.0;
  double mean_total = 0.0;
  int n_diverged = 0;
  int repeats = 0;
};

struct SweepGrid {
  std::vector<double> sigmas;
  std::vector<double> epss;
  std::vector<SweepCell> cells;  // row-major over (sigma, eps)
  int repeats = 0;
};

double median(std::vector<double> values);

}  // namespace sngrc
