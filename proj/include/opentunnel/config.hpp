#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "opentunnel/errors.hpp"

namespace opentunnel {

// Run configuration. File format: one `key = value` pair per line, '#' starts
// a comment, keys are the struct field names below. Unknown keys are
// rejected. serialize() emits the canonical form (fixed key order, full
// double precision), and parse(serialize(c)) reproduces c bit-exactly.
struct RunConfig {
  int n = 2;                 // particle count
  double lambda0 = 1.0;      // contact interaction strength
  double threshold = 0.0;    // post-quench asymptotic potential value T
  double grid_x_min = -8.0;
  double grid_x_max = 120.0;
  int grid_points = 2048;
  double dt = 0.005;
  double t_final = 300.0;
  int snapshot_stride = 200;
  double absorber_onset = -1.0;  // < 0: auto (0.8 * grid_x_max)
  double absorber_strength = 0.2;
  int absorber_order = 4;
  std::string solver_kind = "exact";  // exact | meanfield
  std::string output_dir = "out";
  bool deterministic = true;  // marker: the pipeline holds no hidden randomness
  int analysis_stride = 25;   // occupation analysis every k-th snapshot
  int occupation_count = 4;
  double g_window = 2.5;      // |k| window of emitted g1/g2 matrices
  double peak_k_floor = 0.25;
  double peak_prominence = 0.05;
  double relax_tol = 1e-11;
  int relax_max_steps = 2000;
  std::string sweep_param = "";  // "" | T | lambda0
  std::vector<double> sweep_values;
  int workers = 1;

  double absorber_onset_effective() const {
    return absorber_onset < 0.0 ? 0.8 * grid_x_max : absorber_onset;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw config_error("config: bad numeric value for '" + key + "': " + v);
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw config_error("config: bad integer value for '" + key + "': " + v);
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("config: bad boolean value for '" + key + "': " + v);
}

inline std::vector<double> parse_list(const std::string& key,
                                      const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config: line " + std::to_string(line_no) +
                         " is not 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "n") c.n = detail::parse_int(key, value);
    else if (key == "lambda0") c.lambda0 = detail::parse_double(key, value);
    else if (key == "threshold") c.threshold = detail::parse_double(key, value);
    else if (key == "grid_x_min") c.grid_x_min = detail::parse_double(key, value);
    else if (key == "grid_x_max") c.grid_x_max = detail::parse_double(key, value);
    else if (key == "grid_points") c.grid_points = detail::parse_int(key, value);
    else if (key == "dt") c.dt = detail::parse_double(key, value);
    else if (key == "t_final") c.t_final = detail::parse_double(key, value);
    else if (key == "snapshot_stride") c.snapshot_stride = detail::parse_int(key, value);
    else if (key == "absorber_onset") c.absorber_onset = detail::parse_double(key, value);
    else if (key == "absorber_strength") c.absorber_strength = detail::parse_double(key, value);
    else if (key == "absorber_order") c.absorber_order = detail::parse_int(key, value);
    else if (key == "solver_kind") c.solver_kind = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "deterministic") c.deterministic = detail::parse_bool(key, value);
    else if (key == "analysis_stride") c.analysis_stride = detail::parse_int(key, value);
    else if (key == "occupation_count") c.occupation_count = detail::parse_int(key, value);
    else if (key == "g_window") c.g_window = detail::parse_double(key, value);
    else if (key == "peak_k_floor") c.peak_k_floor = detail::parse_double(key, value);
    else if (key == "peak_prominence") c.peak_prominence = detail::parse_double(key, value);
    else if (key == "relax_tol") c.relax_tol = detail::parse_double(key, value);
    else if (key == "relax_max_steps") c.relax_max_steps = detail::parse_int(key, value);
    else if (key == "sweep_param") c.sweep_param = value;
    else if (key == "sweep_values") c.sweep_values = detail::parse_list(key, value);
    else if (key == "workers") c.workers = detail::parse_int(key, value);
    else throw config_error("config: unknown key '" + key + "'");
  }
  return c;
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  using detail::format_double;
  out << "n = " << c.n << "\n";
  out << "lambda0 = " << format_double(c.lambda0) << "\n";
  out << "threshold = " << format_double(c.threshold) << "\n";
  out << "grid_x_min = " << format_double(c.grid_x_min) << "\n";
  out << "grid_x_max = " << format_double(c.grid_x_max) << "\n";
  out << "grid_points = " << c.grid_points << "\n";
  out << "dt = " << format_double(c.dt) << "\n";
  out << "t_final = " << format_double(c.t_final) << "\n";
  out << "snapshot_stride = " << c.snapshot_stride << "\n";
  out << "absorber_onset = " << format_double(c.absorber_onset) << "\n";
  out << "absorber_strength = " << format_double(c.absorber_strength) << "\n";
  out << "absorber_order = " << c.absorber_order << "\n";
  out << "solver_kind = " << c.solver_kind << "\n";
  out << "output_dir = " << c.output_dir << "\n";
  out << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
  out << "analysis_stride = " << c.analysis_stride << "\n";
  out << "occupation_count = " << c.occupation_count << "\n";
  out << "g_window = " << format_double(c.g_window) << "\n";
  out << "peak_k_floor = " << format_double(c.peak_k_floor) << "\n";
  out << "peak_prominence = " << format_double(c.peak_prominence) << "\n";
  out << "relax_tol = " << format_double(c.relax_tol) << "\n";
  out << "relax_max_steps = " << c.relax_max_steps << "\n";
  out << "sweep_param = " << c.sweep_param << "\n";
  out << "sweep_values = " << detail::format_list(c.sweep_values) << "\n";
  out << "workers = " << c.workers << "\n";
  return out.str();
}

enum class Subcommand { relax, propagate, model, analyze };

/// Validates every solver precondition before any compute or file output.
inline void validate_config(const RunConfig& c, Subcommand cmd) {
  if (c.n < 1) throw config_error("config: n must be positive");
  if (c.solver_kind != "exact" && c.solver_kind != "meanfield")
    throw config_error("config: solver_kind must be exact or meanfield");
  if (c.solver_kind == "exact" && c.n > 3 && cmd != Subcommand::model)
    throw config_error("config: exact solver covers n <= 3; use meanfield");
  if (c.lambda0 < 0.0) throw config_error("config: lambda0 must be >= 0");
  if (!(c.threshold < 2.0))
    throw config_error("config: threshold must be below 2");
  if (!(c.grid_x_max > c.grid_x_min))
    throw config_error("config: grid extent must be positive");
  if (c.grid_points < 8 || !is_power_of_two(c.grid_points))
    throw config_error("config: grid_points must be a power of two >= 8");
  if (cmd == Subcommand::propagate) {
    if (!(c.dt > 0.0) || !(c.t_final > 0.0))
      throw config_error("config: dt and t_final must be positive");
    if (c.snapshot_stride < 1)
      throw config_error("config: snapshot_stride must be >= 1");
    if (c.absorber_strength > 0.0) {
      const double onset = c.absorber_onset_effective();
      if (!(onset > 4.0) || !(onset < c.grid_x_max))
        throw config_error(
            "config: absorber onset must lie inside the grid beyond x = 4");
      if (c.absorber_order < 2)
        throw config_error("config: absorber_order must be >= 2");
    }
  }
  if (!c.sweep_param.empty() && c.sweep_param != "T" && c.sweep_param != "lambda0")
    throw config_error("config: sweep_param must be T or lambda0");
}

}  // namespace opentunnel
