#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sngrc/controller.hpp"
#include "sngrc/features.hpp"
#include "sngrc/metrics.hpp"
#include "sngrc/sde.hpp"

namespace sngrc::io {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Formats a double with 17 significant digits (round-trips exactly).
std::string format17(double v);

/// Whole-file atomic write (temp file in the same directory, then rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// Trajectory CSV: header `t,x1..xn[,u1..un][,xi1..xim]`, one row per state;
/// input and noise columns are present on the rows where they apply (the
/// final state row leaves them empty). Leading '#' lines carry metadata.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const std::vector<std::string>& comments = {});

struct TrajectoryCsv {
  Trajectory trajectory;
  bool has_inputs = false;
  bool has_noises = false;
};

TrajectoryCsv read_trajectory_csv(const std::filesystem::path& path);

/// Control log CSV: `t,x*,xdes*,u*,e*` plus a trigger flag column.
void write_control_log_csv(const std::filesystem::path& path, const ControlLog& log,
                           const std::vector<std::string>& comments = {});

/// Weight matrix CSV (one row per output component) with the block layout
/// recorded in a JSON sidecar; round-trips bit-exactly at 17 digits.
void write_weights_csv(const std::filesystem::path& csv_path,
                       const std::filesystem::path& json_path, const WeightBlocks& w,
                       const std::vector<std::string>& comments = {});

WeightBlocks read_weights_csv(const std::filesystem::path& csv_path,
                              const std::filesystem::path& json_path);

/// Heatmap CSV: `sigma,eps,rmse_total,rmse_x,rmse_y,n_diverged`.
void write_heatmap_csv(const std::filesystem::path& path, const SweepGrid& grid,
                       const std::vector<std::string>& comments = {});

/// KDE CSV: `x` followed by one density column per labeled estimate.
void write_kde_csv(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, DensityEstimate>>& densities,
                   const std::vector<std::string>& comments = {});

/// Two-column series CSV with arbitrary column names.
void write_series_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, Vec>>& columns,
                      const std::vector<std::string>& comments = {});

/// Numeric matrix CSV, one row per sample, one column per channel; an
/// optional non-numeric header row is skipped.
Mat read_matrix_csv(const std::filesystem::path& path);

}  // namespace sngrc::io
