#include "sngrc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sngrc::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CsvError("cannot open " + tmp.string() + " for writing");
    out << content;
  }
  fs::rename(tmp, path);
}

namespace {

void append_comments(std::string& out, const std::vector<std::string>& comments) {
  for (const auto& c : comments) {
    out += "# ";
    out += c;
    out += '\n';
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

}  // namespace

void write_trajectory_csv(const fs::path& path, const Trajectory& traj,
                          const std::vector<std::string>& comments) {
  const int n = traj.dim();
  const int m = static_cast<int>(traj.noises.cols());
  const bool inputs = traj.has_inputs();
  const bool noises = traj.has_noises();

  std::string out;
  append_comments(out, comments);
  out += "t";
  for (int j = 0; j < n; ++j) out += ",x" + std::to_string(j + 1);
  if (inputs)
    for (int j = 0; j < n; ++j) out += ",u" + std::to_string(j + 1);
  if (noises)
    for (int j = 0; j < m; ++j) out += ",xi" + std::to_string(j + 1);
  out += '\n';

  const auto rows = traj.states.rows();
  for (Eigen::Index i = 0; i < rows; ++i) {
    out += format17(traj.grid.time(static_cast<std::size_t>(i)));
    for (int j = 0; j < n; ++j) out += ',' + format17(traj.states(i, j));
    const bool step_row = i + 1 < rows;
    if (inputs) {
      for (int j = 0; j < n; ++j) {
        out += ',';
        if (step_row) out += format17(traj.inputs(i, j));
      }
    }
    if (noises) {
      for (int j = 0; j < m; ++j) {
        out += ',';
        if (step_row) out += format17(traj.noises(i, j));
      }
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

TrajectoryCsv read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty() || header[0] != "t") {
    throw CsvError(path.string() + ": missing trajectory header");
  }
  int n = 0;
  int nu = 0;
  int m = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].starts_with('x') && !header[c].starts_with("xi")) ++n;
    else if (header[c].starts_with('u')) ++nu;
    else if (header[c].starts_with("xi")) ++m;
  }
  if (n == 0) throw CsvError(path.string() + ": no state columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> input_rows;
  std::vector<std::vector<double>> noise_rows;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw CsvError(path.string() + ": row width does not match header");
    }
    double v = 0.0;
    if (!parse_double(fields[0], v)) throw CsvError(path.string() + ": bad time value");
    times.push_back(v);
    std::vector<double> state(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      if (!parse_double(fields[static_cast<std::size_t>(1 + j)], v)) {
        throw CsvError(path.string() + ": bad state value");
      }
      state[static_cast<std::size_t>(j)] = v;
    }
    rows.push_back(std::move(state));
    if (nu > 0) {
      std::vector<double> u(static_cast<std::size_t>(nu));
      bool any = false;
      for (int j = 0; j < nu; ++j) {
        const auto& f = fields[static_cast<std::size_t>(1 + n + j)];
        if (parse_double(f, v)) {
          u[static_cast<std::size_t>(j)] = v;
          any = true;
        }
      }
      if (any) input_rows.push_back(std::move(u));
    }
    if (m > 0) {
      std::vector<double> xi(static_cast<std::size_t>(m));
      bool any = false;
      for (int j = 0; j < m; ++j) {
        const auto& f = fields[static_cast<std::size_t>(1 + n + nu + j)];
        if (parse_double(f, v)) {
          xi[static_cast<std::size_t>(j)] = v;
          any = true;
        }
      }
      if (any) noise_rows.push_back(std::move(xi));
    }
  }
  if (rows.size() < 1) throw CsvError(path.string() + ": no data rows");

  TrajectoryCsv out;
  out.has_inputs = nu > 0;
  out.has_noises = m > 0;
  Trajectory& traj = out.trajectory;
  traj.grid.t0 = times.front();
  traj.grid.n_steps = rows.size() - 1;
  traj.grid.dt = rows.size() > 1 ? (times[1] - times[0]) : 0.0;
  traj.states.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < n; ++j) {
      traj.states(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  traj.inputs.resize(static_cast<Eigen::Index>(input_rows.size()), nu);
  for (std::size_t i = 0; i < input_rows.size(); ++i) {
    for (int j = 0; j < nu; ++j) {
      traj.inputs(static_cast<Eigen::Index>(i), j) = input_rows[i][static_cast<std::size_t>(j)];
    }
  }
  traj.noises.resize(static_cast<Eigen::Index>(noise_rows.size()), m);
  for (std::size_t i = 0; i < noise_rows.size(); ++i) {
    for (int j = 0; j < m; ++j) {
      traj.noises(static_cast<Eigen::Index>(i), j) = noise_rows[i][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void write_control_log_csv(const fs::path& path, const ControlLog& log,
                           const std::vector<std::string>& comments) {
  std::string out;
  append_comments(out, comments);
  const int n = log.records.empty() ? 0 : static_cast<int>(log.records.front().x.size());
  out += "t";
  for (int j = 0; j < n; ++j) out += ",x" + std::to_string(j + 1);
  for (int j = 0; j < n; ++j) out += ",xdes" + std::to_string(j + 1);
  for (int j = 0; j < n; ++j) out += ",u" + std::to_string(j + 1);
  for (int j = 0; j < n; ++j) out += ",e" + std::to_string(j + 1);
  out += ",triggered\n";
  for (const auto& r : log.records) {
    out += format17(r.t);
    for (int j = 0; j < n; ++j) out += ',' + format17(r.x[j]);
    for (int j = 0; j < n; ++j) out += ',' + format17(r.x_des[j]);
    for (int j = 0; j < n; ++j) out += ',' + format17(r.u[j]);
    for (int j = 0; j < n; ++j) out += ',' + format17(r.e[j]);
    out += r.triggered ? ",1\n" : ",0\n";
  }
  write_text_atomic(path, out);
}

void write_weights_csv(const fs::path& csv_path, const fs::path& json_path,
                       const WeightBlocks& w, const std::vector<std::string>& comments) {
  const Mat full = w.full();
  std::string out;
  append_comments(out, comments);
  for (Eigen::Index i = 0; i < full.rows(); ++i) {
    for (Eigen::Index j = 0; j < full.cols(); ++j) {
      if (j > 0) out += ',';
      out += format17(full(i, j));
    }
    out += '\n';
  }
  write_text_atomic(csv_path, out);

  json side;
  side["alpha"] = w.alpha;
  side["normal_eq_residual"] = w.normal_eq_residual;
  side["config"]["state_dim"] = w.config.state_dim;
  side["config"]["delay"] = w.config.delay;
  side["config"]["poly_degrees"] = w.config.poly_degrees;
  side["config"]["include_constant"] = w.config.include_constant;
  side["config"]["include_noise_features"] = w.config.include_noise_features;
  side["config"]["noise_dim"] = w.config.noise_dim;
  write_text_atomic(json_path, side.dump(2) + "\n");
}

WeightBlocks read_weights_csv(const fs::path& csv_path, const fs::path& json_path) {
  std::ifstream jin(json_path);
  if (!jin) throw CsvError("cannot open " + json_path.string());
  json side = json::parse(jin);

  FeatureConfig cfg;
  cfg.state_dim = side.at("config").at("state_dim").get<int>();
  cfg.delay = side.at("config").at("delay").get<int>();
  cfg.poly_degrees = side.at("config").at("poly_degrees").get<std::vector<int>>();
  cfg.include_constant = side.at("config").at("include_constant").get<bool>();
  cfg.include_noise_features = side.at("config").at("include_noise_features").get<bool>();
  cfg.noise_dim = side.at("config").at("noise_dim").get<int>();

  std::ifstream in(csv_path);
  if (!in) throw CsvError("cannot open " + csv_path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_double(fields[j], row[j])) throw CsvError("bad weight value");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError(csv_path.string() + ": empty weight matrix");
  Mat full(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw CsvError("ragged weight matrix");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  if (full.cols() != static_cast<Eigen::Index>(cfg.total_feature_count())) {
    throw CsvError("weight matrix width does not match the sidecar feature config");
  }
  WeightBlocks w = WeightBlocks::from_full(full, side.at("alpha").get<double>(), cfg);
  w.normal_eq_residual = side.value("normal_eq_residual", 0.0);
  return w;
}

void write_heatmap_csv(const fs::path& path, const SweepGrid& grid,
                       const std::vector<std::string>& comments) {
  std::string out;
  append_comments(out, comments);
  out += "sigma,eps,rmse_total,rmse_x,rmse_y,n_diverged\n";
  for (const auto& c : grid.cells) {
    out += format17(c.sigma);
    out += ',' + format17(c.eps);
    out += ',' + format17(c.median_total);
    out += ',' + format17(c.median_x);
    out += ',' + format17(c.median_y);
    out += ',' + std::to_string(c.n_diverged);
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_kde_csv(const fs::path& path,
                   const std::vector<std::pair<std::string, DensityEstimate>>& densities,
                   const std::vector<std::string>& comments) {
  if (densities.empty()) throw CsvError("write_kde_csv: no densities");
  std::string out;
  append_comments(out, comments);
  out += "x";
  for (const auto& [label, d] : densities) out += ",density_" + label;
  out += '\n';
  const Vec& grid = densities.front().second.grid;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    out += format17(grid[i]);
    for (const auto& [label, d] : densities) out += ',' + format17(d.density[i]);
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_series_csv(const fs::path& path,
                      const std::vector<std::pair<std::string, Vec>>& columns,
                      const std::vector<std::string>& comments) {
  if (columns.empty()) throw CsvError("write_series_csv: no columns");
  std::string out;
  append_comments(out, comments);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c > 0) out += ',';
    out += columns[c].first;
  }
  out += '\n';
  const Eigen::Index rows = columns.front().second.size();
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c > 0) out += ',';
      out += format17(columns[c].second[i]);
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

Mat read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    std::vector<double> row(fields.size());
    bool ok = true;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_double(fields[j], row[j])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (first) {  // optional header row
        first = false;
        continue;
      }
      throw CsvError(path.string() + ": non-numeric row");
    }
    first = false;
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw CsvError(path.string() + ": ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError(path.string() + ": no data");
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

}  // namespace sngrc::io
