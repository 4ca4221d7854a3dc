// ersc: command-line front end.
//
//   ersc <command> [--config <path>] [--out <dir>] [--workers N] [--seed S]
//
// Without --config the built-in defaults are used. ERSC_WORKERS overrides the
// configured worker count; --workers overrides both.

#include "ersc/run.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(const std::exception& e) {
  std::cerr << "error[" << ersc::error_category(e) << "]: " << one_line(e.what()) << '\n';
  return ersc::exit_status_for(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ergodic risk-sensitive control solver and verification harness", "ersc"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::string commands;
  for (const auto& c : ersc::known_commands()) commands += (commands.empty() ? "" : ", ") + c;
  app.add_option("command", command, "One of: " + commands)->required();
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
  app.add_option("--workers", workers, "Worker threads for simulation")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Simulation seed (overrides simulation.seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << one_line(e.what()) << '\n';
    return ersc::kExitUsage;
  }

  try {
    const auto& cmds = ersc::known_commands();
    if (std::find(cmds.begin(), cmds.end(), command) == cmds.end())
      throw ersc::UsageError("unknown command '" + command + "' (expected one of: " + commands + ")");

    ersc::RunConfig cfg = config_path.empty() ? ersc::parse_config(nlohmann::json::object())
                                              : ersc::load_config(config_path);
    if (const char* env = std::getenv("ERSC_WORKERS")) {
      try {
        cfg.simulation.sim.workers = std::stoi(env);
      } catch (const std::exception&) {
        throw ersc::ValidationError(std::string("ERSC_WORKERS is not an integer: ") + env);
      }
    }
    if (workers) cfg.simulation.sim.workers = *workers;
    if (seed) cfg.simulation.sim.seed = *seed;
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    if (cfg.simulation.sim.workers < 1) throw ersc::ValidationError("workers must be >= 1");

    ersc::RunReport rep = ersc::run_command(command, cfg);
    ersc::emit_plot_data(rep, cfg.output.directory, &rep.notices);
    ersc::write_report(rep, cfg.output.directory, cfg.output.formats);
    if (std::find(cfg.output.formats.begin(), cfg.output.formats.end(), "json") != cfg.output.formats.end())
      ersc::write_canonical_config(cfg, cfg.output.directory);
    std::cout << rep.to_json().dump(2) << '\n';
    if (rep.check_failed) {
      std::cerr << "error[check]: " << command << " reported failed checks\n";
      return ersc::kExitCheckFailed;
    }
    return ersc::kExitOk;
  } catch (const std::exception& e) {
    return fail(e);
  }
}
