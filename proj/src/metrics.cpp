#include "sngrc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sngrc {

RmseReport rmse(const ControlLog& log, std::size_t begin, std::size_t end) {
  if (begin >= end || end > log.records.size()) {
    throw std::invalid_argument("rmse: empty or out-of-range window");
  }
  RmseReport rep;
  rep.begin = begin;
  rep.end = end;
  const int dim = static_cast<int>(log.records[begin].e.size());
  rep.per_component = Vec::Zero(dim);
  double sq = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const Vec& e = log.records[i].e;
    sq += e.squaredNorm();
    rep.per_component += e.cwiseAbs2();
  }
  const double n = static_cast<double>(end - begin);
  rep.total = std::sqrt(sq / (n * dim));
  rep.per_component = (rep.per_component / n).cwiseSqrt();
  return rep;
}

namespace {

double sample_quantile(Vec sorted, double q) {
  const Eigen::Index n = sorted.size();
  const double pos = q * static_cast<double>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

DensityEstimate kde_impl(const Vec& samples, const Vec& grid, double bandwidth,
                         bool parallel) {
  if (samples.size() < 2) throw std::invalid_argument("kde: need at least 2 samples");
  if (bandwidth <= 0.0) throw std::invalid_argument("kde: bandwidth must be positive");
  DensityEstimate d;
  d.grid = grid;
  d.bandwidth = bandwidth;
  d.n_samples = static_cast<std::size_t>(samples.size());
  d.density.resize(grid.size());

  const double norm = 1.0 /
      (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * M_PI));
  const auto eval_point = [&](Eigen::Index g) {
    double acc = 0.0;
    for (Eigen::Index s = 0; s < samples.size(); ++s) {
      const double z = (grid[g] - samples[s]) / bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    d.density[g] = acc * norm;
  };

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index g = 0; g < grid.size(); ++g) eval_point(g);
  } else {
    for (Eigen::Index g = 0; g < grid.size(); ++g) eval_point(g);
  }
  return d;
}

}  // namespace

double silverman_bandwidth(const Vec& samples) {
  const auto n = static_cast<double>(samples.size());
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1.0));
  Vec sorted = samples;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double iqr = sample_quantile(sorted, 0.75) - sample_quantile(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = std::max(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(n, -0.2);
}

DensityEstimate kde(const Vec& samples, const Vec& grid, double bandwidth) {
  return kde_impl(samples, grid, bandwidth, true);
}

DensityEstimate kde_reference(const Vec& samples, const Vec& grid, double bandwidth) {
  return kde_impl(samples, grid, bandwidth, false);
}

Vec default_kde_grid(const Vec& samples, double bandwidth, int points) {
  const double lo = samples.minCoeff() - 3.0 * bandwidth;
  const double hi = samples.maxCoeff() + 3.0 * bandwidth;
  return Vec::LinSpaced(points, lo, hi);
}

DensityEstimate kde_auto(const Vec& samples, int points) {
  double h = silverman_bandwidth(samples);
  bool degenerate = false;
  if (!(h > 0.0)) {
    // All samples equal: narrow spike around the common value.
    degenerate = true;
    h = 1e-3 * (1.0 + std::abs(samples[0]));
  }
  DensityEstimate d = kde(samples, default_kde_grid(samples, h, points), h);
  d.degenerate = degenerate;
  return d;
}

double trapezoid(const Vec& grid, const Vec& values) {
  double acc = 0.0;
  for (Eigen::Index i = 1; i < grid.size(); ++i) {
    acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return acc;
}

double density_iqr(const DensityEstimate& d) {
  const Eigen::Index n = d.grid.size();
  Vec cdf(n);
  cdf[0] = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    cdf[i] = cdf[i - 1] + 0.5 * (d.density[i] + d.density[i - 1]) * (d.grid[i] - d.grid[i - 1]);
  }
  const double total = cdf[n - 1];
  if (total <= 0.0) return 0.0;
  const auto quantile = [&](double q) {
    const double target = q * total;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (cdf[i] >= target) {
        const double span = cdf[i] - cdf[i - 1];
        const double frac = span > 0.0 ? (target - cdf[i - 1]) / span : 0.0;
        return d.grid[i - 1] + frac * (d.grid[i] - d.grid[i - 1]);
      }
    }
    return d.grid[n - 1];
  };
  return quantile(0.75) - quantile(0.25);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace sngrc
