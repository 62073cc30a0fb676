#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "opentunnel/config.hpp"
#include "opentunnel/csvio.hpp"
#include "opentunnel/model.hpp"
#include "opentunnel/observables.hpp"
#include "opentunnel/solver.hpp"
#include "opentunnel/version.hpp"

namespace opentunnel {

namespace fs = std::filesystem;

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Written exactly once per run, after all listed outputs exist.
struct RunManifest {
  std::string subcommand;
  std::string config_text;  // canonical form
  std::string hash;
  std::string version = kVersion;
  double wall_seconds = 0.0;
  std::map<std::string, double> results;
  std::vector<CheckResult> checks;
  std::vector<std::string> outputs;

  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline void write_manifest(const RunManifest& m, const fs::path& dir) {
  for (const auto& f : m.outputs)
    if (!fs::exists(dir / f))
      throw data_error("manifest lists missing output " + f);
  nlohmann::json j;
  j["subcommand"] = m.subcommand;
  j["config"] = m.config_text;
  j["hash"] = m.hash;
  j["version"] = m.version;
  j["wall_seconds"] = m.wall_seconds;
  j["results"] = m.results;
  j["outputs"] = m.outputs;
  auto& checks = j["checks"] = nlohmann::json::array();
  for (const auto& c : m.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
}

// Relaxation runs on a power-of-two subgrid sharing x_min and dx with the
// dynamics grid (the trap state vanishes beyond |x| ~ 6); the result is
// zero-embedded into the full grid.
inline Grid relax_subgrid(const Grid& grid) {
  int n_sub = 256;
  while (n_sub < grid.n_points &&
         grid.x_min + n_sub * grid.dx < 6.0)
    n_sub *= 2;
  n_sub = std::min(n_sub, grid.n_points);
  return make_grid(grid.x_min, grid.x_min + n_sub * grid.dx, n_sub);
}

inline ManyBodyWavefunction embed_state(const ManyBodyWavefunction& sub_state,
                                        const Grid& sub, const Grid& full) {
  if (sub.n_points == full.n_points) return sub_state;
  ManyBodyWavefunction out;
  out.N = sub_state.N;
  out.lambda0 = sub_state.lambda0;
  out.kind = sub_state.kind;
  out.field.n_axes = sub_state.field.n_axes;
  out.field.representation = Representation::position;
  const int axes = out.field.n_axes;
  const int ns = sub.n_points, nf = full.n_points;
  std::size_t total = 1;
  for (int a = 0; a < axes; ++a) total *= nf;
  out.field.values.assign(total, 0.0);
  const auto& v = sub_state.field.values;
  if (axes == 1) {
    for (int i = 0; i < ns; ++i) out.field.values[i] = v[i];
  } else if (axes == 2) {
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < ns; ++j)
        out.field.values[std::size_t(i) * nf + j] = v[std::size_t(i) * ns + j];
  } else {
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < ns; ++j)
        for (int k = 0; k < ns; ++k)
          out.field.values[(std::size_t(i) * nf + j) * nf + k] =
              v[(std::size_t(i) * ns + j) * ns + k];
  }
  return out;
}

// Energy table for the model at the configured particle count: exact product
// grids for N <= 3, mean-field orbital energies beyond.
inline model::EnergyTable table_for(int N, double lambda0,
                                    const RelaxOptions& relax_opts) {
  if (N <= 3) {
    const Grid g2 = make_grid(-6.0, 6.0, 256);
    const Grid g3 = make_grid(-6.0, 6.0, 64);
    model::EnergyTable t;
    t.lambda0 = lambda0;
    t.source = model::EnergySource::exact;
    t.energy[0] = 0.0;
    t.energy[1] = 0.5;
    if (N >= 2) t.energy[2] = relax_ground_state(2, lambda0, g2, relax_opts).energy;
    if (N >= 3) t.energy[3] = relax_ground_state(3, lambda0, g3, relax_opts).energy;
    return t;
  }
  const Grid g = make_grid(-8.0, 8.0, 256);
  return model::meanfield_energy_table(N, lambda0, g, relax_opts);
}

inline RelaxOptions relax_options_from(const RunConfig& c) {
  RelaxOptions o;
  o.tol = c.relax_tol;
  o.max_steps = c.relax_max_steps;
  return o;
}

inline std::string param_label(const std::string& param, double value) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s_%.6g", param.c_str(), value);
  return buf;
}

}  // namespace detail

inline RunManifest run_relax(const RunConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.subcommand = "relax";
  m.config_text = serialize_config(cfg);
  m.hash = hash_string(fnv1a(m.config_text));

  const Grid grid = make_grid(cfg.grid_x_min, cfg.grid_x_max, cfg.grid_points);
  const auto opts = detail::relax_options_from(cfg);

  std::vector<double> rho;
  double energy = 0.0;
  if (cfg.solver_kind == "exact") {
    const auto result = relax_ground_state(cfg.n, cfg.lambda0, grid, opts);
    energy = result.energy;
    rho = detail::density_marginal(result.state.field.values, cfg.n,
                                   grid.n_points, cfg.n, grid.dx);
  } else {
    const auto result = gp_relax(cfg.n, cfg.lambda0, grid, opts);
    energy = result.energy;
    rho.resize(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i)
      rho[i] = cfg.n * std::norm(result.state.field.values[i]);
  }
  m.results["energy"] = energy;

  fs::create_directories(out_dir);
  {
    CsvWriter csv(out_dir / "density.csv", m.hash, {"x", "rho"});
    for (int i = 0; i < grid.n_points; ++i)
      csv.row({grid.x_values[i], rho[i]});
  }
  write_potential_csv((out_dir / "potential.csv").string(),
                      make_potential(cfg.threshold), cfg.grid_x_min,
                      std::min(cfg.grid_x_max, 12.0), 1201);
  m.outputs = {"density.csv", "potential.csv"};
  m.checks.push_back({"density_integral",
                      std::abs(integrate(rho, grid) - cfg.n) < 1e-6,
                      "quadrature of rho vs N"});

  m.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  detail::write_manifest(m, out_dir);
  return m;
}

inline RunManifest run_propagate(const RunConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.subcommand = "propagate";
  m.config_text = serialize_config(cfg);
  m.hash = hash_string(fnv1a(m.config_text));

  if (cfg.solver_kind != "exact")
    throw config_error("propagate: exact solver required (n <= 3)");
  if (cfg.n > 3) throw config_error("propagate: exact dynamics covers n <= 3");
  {
    double logn = cfg.n * std::log2(double(cfg.grid_points));
    if (logn > 26.0)
      throw config_error("propagate: product grid exceeds the memory budget "
                         "(n_points^N > 2^26)");
  }

  const Grid grid = make_grid(cfg.grid_x_min, cfg.grid_x_max, cfg.grid_points);
  const Grid sub = detail::relax_subgrid(grid);
  const auto relax_opts = detail::relax_options_from(cfg);

  const auto relaxed = relax_ground_state(cfg.n, cfg.lambda0, sub, relax_opts);
  const auto state = detail::embed_state(relaxed.state, sub, grid);

  const PotentialSpec spec = make_potential(cfg.threshold);
  Absorber absorber;
  absorber.onset = cfg.absorber_onset_effective();
  absorber.strength = cfg.absorber_strength;
  absorber.order = cfg.absorber_order;

  PropagateOptions popts;
  popts.mode = PropagateOptions::Mode::post_quench;
  popts.momentum_density = true;
  popts.analysis_stride = cfg.analysis_stride;
  popts.occupation_count = cfg.occupation_count;

  const auto traj = propagate(state, grid, spec, cfg.dt, cfg.t_final, absorber,
                              cfg.snapshot_stride, popts);

  // model reference for the peak columns
  const auto table = detail::table_for(cfg.n, cfg.lambda0, relax_opts);
  const auto spectrum = model::emission_spectrum(cfg.n, cfg.threshold, table);
  const double k1_model =
      !spectrum.empty() && spectrum.front().k ? *spectrum.front().k
                                              : std::numeric_limits<double>::quiet_NaN();

  fs::create_directories(out_dir);
  {
    CsvWriter csv(out_dir / "pnot.csv", m.hash, {"t", "pnot"});
    for (const auto& s : traj.snapshots) csv.row({s.t, s.pnot});
  }
  {
    CsvWriter csv(out_dir / "rho_k.csv", m.hash, {"t", "k", "value"});
    for (const auto& s : traj.snapshots)
      for (int j = 0; j < grid.n_points; ++j)
        csv.row({s.t, grid.k_values[j], s.momentum_density[j]});
  }
  {
    CsvWriter csv(out_dir / "occupations.csv", m.hash,
                  {"t", "f1", "f2", "f3", "f4"});
    for (const auto& s : traj.snapshots) {
      if (s.occupation_fractions.empty()) continue;
      std::vector<double> row = {s.t};
      for (int q = 0; q < 4; ++q)
        row.push_back(q < int(s.occupation_fractions.size())
                          ? s.occupation_fractions[q]
                          : 0.0);
      csv.row(row);
    }
  }
  {
    CsvWriter csv(out_dir / "peaks.csv", m.hash,
                  {"t", "k_peak", "height", "k_model", "delta"});
    for (const auto& s : traj.snapshots) {
      const auto peaks = detect_peaks(s.momentum_density, grid.k_values,
                                      cfg.peak_k_floor, cfg.peak_prominence);
      if (peaks.empty()) continue;
      csv.row({s.t, peaks.front().k, peaks.front().height, k1_model,
               peaks.front().k - k1_model});
    }
  }
  // windowed g1/g2 matrices in momentum space at the final time
  if (traj.has_final_state && cfg.n >= 2) {
    const auto rho1k = one_body_density_matrix(traj.final_state, grid,
                                               Representation::momentum);
    const auto g1m = g1(rho1k);
    const auto rho2k = two_body_diagonal(traj.final_state, grid,
                                         Representation::momentum);
    const auto dk = density(rho1k);
    const auto g2m = g2(rho2k, dk);

    std::vector<int> window;
    for (int j = 0; j < grid.n_points; ++j)
      if (std::abs(grid.k_values[j]) <= cfg.g_window) window.push_back(j);
    std::vector<std::string> header = {"k"};
    for (int j : window) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.12g", grid.k_values[j]);
      header.push_back(buf);
    }
    {
      CsvWriter csv(out_dir / "g1.csv", m.hash, header);
      for (int a : window) {
        std::vector<double> row;
        for (int b : window) row.push_back(std::norm(g1m(a, b)));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", grid.k_values[a]);
        csv.row(buf, row);
      }
    }
    {
      CsvWriter csv(out_dir / "g2.csv", m.hash, header);
      for (int a : window) {
        std::vector<double> row;
        for (int b : window) row.push_back(g2m(a, b));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", grid.k_values[a]);
        csv.row(buf, row);
      }
    }
  }
  write_potential_csv((out_dir / "potential.csv").string(), spec,
                      cfg.grid_x_min, std::min(cfg.grid_x_max, 12.0), 1201);

  m.outputs = {"pnot.csv", "rho_k.csv", "occupations.csv", "peaks.csv",
               "potential.csv"};
  if (traj.has_final_state && cfg.n >= 2) {
    m.outputs.push_back("g1.csv");
    m.outputs.push_back("g2.csv");
  }

  const auto& last = traj.snapshots.back();
  const auto pred = model::predict_final_state(cfg.n, cfg.threshold, table);
  m.results["initial_energy"] = relaxed.energy;
  m.results["final_pnot"] = last.pnot;
  m.results["final_norm"] = last.norm;
  m.results["k1_model"] = k1_model;
  m.results["predicted_n_in"] = pred.n_in;
  const auto final_peaks = detect_peaks(last.momentum_density, grid.k_values,
                                        cfg.peak_k_floor, cfg.peak_prominence);
  if (!final_peaks.empty()) m.results["k1_measured"] = final_peaks.front().k;

  bool monotone = true;
  for (std::size_t i = 1; i < traj.snapshots.size(); ++i)
    if (traj.snapshots[i].norm > traj.snapshots[i - 1].norm * (1.0 + 1e-10))
      monotone = false;
  m.checks.push_back({"norm_non_increasing", monotone, "absorber active"});

  m.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  detail::write_manifest(m, out_dir);
  return m;
}

inline RunManifest run_model(const RunConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.subcommand = "model";
  m.config_text = serialize_config(cfg);
  m.hash = hash_string(fnv1a(m.config_text));

  const auto relax_opts = detail::relax_options_from(cfg);
  const int N = cfg.n;
  fs::create_directories(out_dir);

  const auto prediction_columns = [&]() {
    std::vector<std::string> cols = {"param"};
    for (int n_in = N; n_in >= 0; --n_in) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "E_%d_%d", n_in, N - n_in);
      cols.push_back(buf);
    }
    return cols;
  };

  if (cfg.sweep_param.empty()) {
    const auto table = detail::table_for(N, cfg.lambda0, relax_opts);
    const auto fs_pred = model::predict_final_state(N, cfg.threshold, table);
    const auto spectrum = model::emission_spectrum(N, cfg.threshold, table);
    {
      CsvWriter csv(out_dir / "spectrum.csv", m.hash, {"i", "mu", "k", "open"});
      for (const auto& line : spectrum)
        csv.row({double(line.process), line.mu, line.k ? *line.k : 0.0,
                 line.k ? 1.0 : 0.0});
    }
    m.results["predicted_n_in"] = fs_pred.n_in;
    m.results["predicted_n_out"] = fs_pred.n_out;
    m.results["predicted_e_tot"] = fs_pred.e_tot;
    for (int n = 0; n <= std::min(N, 3); ++n) {
      m.results["E_HO_" + std::to_string(n)] = table.at(n);
    }
    m.outputs = {"spectrum.csv"};
  } else {
    if (cfg.sweep_values.size() < 2)
      throw config_error("model sweep needs at least two sweep_values");
    const bool over_T = cfg.sweep_param == "T";

    std::vector<model::EnergyTable> tables;
    std::vector<double> params = cfg.sweep_values;
    std::sort(params.begin(), params.end());
    if (over_T) {
      tables.push_back(detail::table_for(N, cfg.lambda0, relax_opts));
    } else {
      for (double lam : params)
        tables.push_back(detail::table_for(N, lam, relax_opts));
    }

    const auto table_at = [&](double p) -> const model::EnergyTable& {
      if (over_T) return tables.front();
      const auto it = std::lower_bound(params.begin(), params.end(), p);
      return tables[std::size_t(it - params.begin())];
    };

    {
      CsvWriter csv(out_dir / "energetics.csv", m.hash, prediction_columns());
      for (double p : params) {
        std::vector<double> row = {p};
        const double T = over_T ? p : cfg.threshold;
        const auto& tab = table_at(p);
        for (int n_in = N; n_in >= 0; --n_in)
          row.push_back(model::total_energy(n_in, N - n_in, T, tab));
        csv.row(row);
      }
    }
    {
      CsvWriter csv(out_dir / "predictions.csv", m.hash,
                    {"param", "n_in", "n_out", "e_tot"});
      for (double p : params) {
        const double T = over_T ? p : cfg.threshold;
        const auto pred = model::predict_final_state(N, T, table_at(p));
        csv.row({p, double(pred.n_in), double(pred.n_out), pred.e_tot});
      }
    }

    model::SweepSpec sweep;
    sweep.parameter = over_T ? model::SweepParameter::threshold
                             : model::SweepParameter::interaction;
    sweep.fixed = over_T ? cfg.lambda0 : cfg.threshold;
    sweep.lo = params.front();
    sweep.hi = params.back();
    sweep.resolution = std::max<int>(256, int(params.size()));
    std::function<model::EnergyTable(double)> family;
    if (over_T) {
      family = [&](double) { return tables.front(); };
    } else {
      family = model::make_interpolating_family(params, tables);
    }
    const auto crossings = model::critical_points(N, family, sweep);
    {
      CsvWriter csv(out_dir / "crossings.csv", m.hash,
                    {"param", "n_in_a", "n_in_b"});
      for (const auto& c : crossings)
        csv.row({c.parameter, double(c.a_in), double(c.b_in)});
    }
    m.results["crossing_count"] = double(crossings.size());
    m.outputs = {"energetics.csv", "predictions.csv", "crossings.csv"};
  }

  m.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  detail::write_manifest(m, out_dir);
  return m;
}

/// Re-derives peak tables from a completed propagate run's rho_k.csv.
inline RunManifest run_analyze(const RunConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.subcommand = "analyze";
  m.config_text = serialize_config(cfg);
  m.hash = hash_string(fnv1a(m.config_text));

  const fs::path source = out_dir / "rho_k.csv";
  if (!fs::exists(source))
    throw config_error("analyze: " + source.string() + " not found");

  std::ifstream in(source);
  std::string line;
  std::map<double, std::vector<std::pair<double, double>>> by_time;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    double t, k, v;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &k, &v) == 3)
      by_time[t].push_back({k, v});
  }
  if (by_time.empty()) throw data_error("analyze: rho_k.csv holds no rows");

  const auto table = detail::table_for(cfg.n, cfg.lambda0,
                                       detail::relax_options_from(cfg));
  const auto spectrum = model::emission_spectrum(cfg.n, cfg.threshold, table);
  const double k1_model =
      !spectrum.empty() && spectrum.front().k ? *spectrum.front().k
                                              : std::numeric_limits<double>::quiet_NaN();

  {
    CsvWriter csv(out_dir / "peaks.csv", m.hash,
                  {"t", "k_peak", "height", "k_model", "delta"});
    for (auto& [t, samples] : by_time) {
      std::sort(samples.begin(), samples.end());
      std::vector<double> k(samples.size()), v(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        k[i] = samples[i].first;
        v[i] = samples[i].second;
      }
      const auto peaks =
          detect_peaks(v, k, cfg.peak_k_floor, cfg.peak_prominence);
      if (peaks.empty()) continue;
      csv.row({t, peaks.front().k, peaks.front().height, k1_model,
               peaks.front().k - k1_model});
    }
  }
  m.results["k1_model"] = k1_model;
  m.outputs = {"peaks.csv"};
  m.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  detail::write_manifest(m, out_dir);
  return m;
}

inline RunManifest run(const RunConfig& cfg, Subcommand cmd,
                       const fs::path& out_dir) {
  validate_config(cfg, cmd);
  switch (cmd) {
    case Subcommand::relax: return run_relax(cfg, out_dir);
    case Subcommand::propagate: return run_propagate(cfg, out_dir);
    case Subcommand::model: return run_model(cfg, out_dir);
    default: return run_analyze(cfg, out_dir);
  }
}

struct SweepMemberResult {
  double value = 0.0;
  bool ok = false;
  std::string error;
  RunManifest manifest;
};

/// One isolated run per parameter value plus a combined summary joining the
/// model prediction with measured peaks and final nonescape values. A failing
/// member marks its row failed without aborting the siblings.
inline std::vector<SweepMemberResult> run_sweep(const RunConfig& base,
                                                Subcommand task,
                                                const fs::path& out_dir) {
  if (base.sweep_param.empty())
    throw config_error("sweep: sweep_param must be set (T or lambda0)");
  if (base.sweep_values.empty())
    throw config_error("sweep: sweep_values must be non-empty");
  validate_config(base, task);

  const auto& values = base.sweep_values;
  std::vector<SweepMemberResult> results(values.size());
  fs::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(base.workers, int(values.size())));
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= values.size()) return;
      RunConfig cfg = base;
      cfg.sweep_param.clear();
      cfg.sweep_values.clear();
      if (base.sweep_param == "T")
        cfg.threshold = values[i];
      else
        cfg.lambda0 = values[i];
      results[i].value = values[i];
      const fs::path member_dir =
          out_dir / detail::param_label(base.sweep_param, values[i]);
      try {
        results[i].manifest = run(cfg, task, member_dir);
        results[i].ok = true;
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const std::string hash = hash_string(fnv1a(serialize_config(base)));
  CsvWriter csv(out_dir / "summary.csv", hash,
                {"param", "ok", "final_pnot", "k1_measured", "k1_model",
                 "delta", "predicted_n_in"});
  for (const auto& r : results) {
    const auto get = [&](const char* key) {
      const auto it = r.manifest.results.find(key);
      return it == r.manifest.results.end()
                 ? std::numeric_limits<double>::quiet_NaN()
                 : it->second;
    };
    csv.row({r.value, r.ok ? 1.0 : 0.0, get("final_pnot"), get("k1_measured"),
             get("k1_model"),
             get("k1_measured") - get("k1_model"),
             get("predicted_n_in")});
  }
  return results;
}

}  // namespace opentunnel
