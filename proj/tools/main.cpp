// Command-line front end: relax | propagate | model | analyze | sweep.
// Exit codes: 0 success, 2 configuration error, 3 numerical instability,
// 4 non-convergence, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "opentunnel/runner.hpp"
#include "opentunnel/version.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw opentunnel::config_error("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace opentunnel;

  CLI::App app{"Interacting-boson tunneling to open space over a potential "
               "threshold: solvers, analysis and emission-model predictions"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string sweep_param;
  std::string sweep_values;
  std::string sweep_task = "propagate";
  int workers = 0;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file")
        ->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
  };

  auto* cmd_relax = app.add_subcommand("relax", "trapped ground state");
  auto* cmd_prop = app.add_subcommand("propagate", "quench dynamics");
  auto* cmd_model = app.add_subcommand("model", "emission-model energetics");
  auto* cmd_analyze = app.add_subcommand("analyze", "re-derive peaks from a run");
  auto* cmd_sweep = app.add_subcommand("sweep", "one run per parameter value");
  for (auto* cmd : {cmd_relax, cmd_prop, cmd_model, cmd_analyze, cmd_sweep})
    add_common(cmd);
  cmd_sweep->add_option("--param", sweep_param, "T or lambda0");
  cmd_sweep->add_option("--values", sweep_values, "comma-separated values");
  cmd_sweep->add_option("--task", sweep_task,
                        "relax | propagate | model per member");
  cmd_sweep->add_option("--workers", workers, "concurrent member runs");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = parse_config(read_file(config_path));
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (workers > 0) cfg.workers = workers;
    if (!sweep_param.empty()) cfg.sweep_param = sweep_param;
    if (!sweep_values.empty())
      cfg.sweep_values = detail::parse_list("sweep_values", sweep_values);

    const auto parse_task = [](const std::string& s) {
      if (s == "relax") return Subcommand::relax;
      if (s == "propagate") return Subcommand::propagate;
      if (s == "model") return Subcommand::model;
      if (s == "analyze") return Subcommand::analyze;
      throw config_error("unknown task: " + s);
    };

    if (app.got_subcommand(cmd_sweep)) {
      const auto results =
          run_sweep(cfg, parse_task(sweep_task), cfg.output_dir);
      bool all_ok = true;
      for (const auto& r : results) {
        std::printf("%s = %-10g %s%s%s\n", cfg.sweep_param.c_str(), r.value,
                    r.ok ? "ok" : "FAILED", r.ok ? "" : ": ",
                    r.ok ? "" : r.error.c_str());
        all_ok = all_ok && r.ok;
      }
      return all_ok ? 0 : 1;
    }

    Subcommand cmd = Subcommand::relax;
    if (app.got_subcommand(cmd_prop)) cmd = Subcommand::propagate;
    if (app.got_subcommand(cmd_model)) cmd = Subcommand::model;
    if (app.got_subcommand(cmd_analyze)) cmd = Subcommand::analyze;

    const auto manifest = run(cfg, cmd, cfg.output_dir);
    for (const auto& [key, value] : manifest.results)
      std::printf("%s = %.12g\n", key.c_str(), value);
    std::printf("wall_seconds = %.2f\n", manifest.wall_seconds);
    return manifest.all_passed() ? 0 : 1;
  } catch (const config_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const usage_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const instability_error& e) {
    std::fprintf(stderr, "numerical instability: %s\n", e.what());
    return 3;
  } catch (const convergence_error& e) {
    std::fprintf(stderr, "non-convergence: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
