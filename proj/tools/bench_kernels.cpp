// Benchmark comparing the OpenMP kernels against their serial reference
// implementations: design assembly, KDE evaluation, and the sweep driver.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sngrc/config.hpp"
#include "sngrc/features.hpp"
#include "sngrc/metrics.hpp"
#include "sngrc/pipeline.hpp"
#include "sngrc/rng.hpp"
#include "sngrc/sde.hpp"

using namespace sngrc;

namespace {

template <typename Fn>
double time_ms(Fn&& fn, int iterations) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < iterations; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / iterations;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-18s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns run serially\n");
#endif

  // Design assembly on a long perturbed trajectory.
  {
    const SdeSystem sys = vdp_additive(0.5, 0.5, 1.0);
    const TimeGrid grid{0.0, 0.01, 20000};
    const PerturbationSignal sig = make_perturbation(2, grid.n_steps, 5.0, 10, 7);
    const InputSource input = input_from_matrix(sig.u);
    SimulateOptions opts;
    opts.input = &input;
    Vec x0(2);
    x0 << 0.5, 0.5;
    const Trajectory traj = simulate(sys, x0, grid, 7, opts);
    FeatureConfig fc;
    const double serial = time_ms([&] { assemble_design_reference(traj, fc); }, 20);
    const double parallel = time_ms([&] { assemble_design(traj, fc); }, 20);
    report("assemble_design", serial, parallel);
  }

  // KDE on a large sample set.
  {
    Vec samples(200000);
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      samples[i] = rng::standard_normal(11, 0, static_cast<std::uint64_t>(i));
    }
    const double h = silverman_bandwidth(samples);
    const Vec grid = default_kde_grid(samples, h, 512);
    const double serial = time_ms([&] { kde_reference(samples, grid, h); }, 3);
    const double parallel = time_ms([&] { kde(samples, grid, h); }, 3);
    report("kde", serial, parallel);
  }

  // Full robustness sweep (each task is an entire pipeline run).
  {
    ExperimentConfig cfg;
    cfg.sweep.sigmas = {0.5, 1.0};
    cfg.sweep.epss = {1.0, 0.5};
    cfg.repeats = 3;
    cfg.grid.steps = 1200;
    cfg.grid.transient = 300;
    const double serial = time_ms([&] { run_sweep_reference(cfg); }, 1);
    const double parallel = time_ms([&] { run_sweep(cfg, true); }, 1);
    report("run_sweep", serial, parallel);
  }

  return 0;
}
