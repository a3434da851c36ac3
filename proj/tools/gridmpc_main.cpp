#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gridmpc/run_output.hpp"
#include "gridmpc/scenario_io.hpp"
#include "gridmpc/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gridmpc::ScenarioError("cannot open scenario file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw gridmpc::ScenarioError(std::string("json parse error: ") + e.what());
  }
}

int cmd_validate(const std::string& path) {
  try {
    const auto parsed = gridmpc::parse_scenario(load_json(path));
    for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "OK: " << path << " is a valid scenario ("
              << parsed.scenario.zone.nodes.size() << " nodes, "
              << parsed.scenario.zone.lines.size() << " lines, "
              << parsed.scenario.duration_steps << " steps)\n";
    return kExitOk;
  } catch (const gridmpc::ScenarioError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return kExitValidation;
  }
}

int cmd_run(const std::string& path, std::string out_dir, bool no_controller,
            long long seed_override, const std::string& qp_dump) {
  gridmpc::ParsedScenario parsed;
  try {
    parsed = gridmpc::parse_scenario(load_json(path));
  } catch (const gridmpc::ScenarioError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return kExitValidation;
  }
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << "\n";

  gridmpc::Scenario& scenario = parsed.scenario;
  if (no_controller) scenario.controller_enabled = false;
  if (!qp_dump.empty()) scenario.controller.qp_dump_path = qp_dump;
  if (seed_override >= 0) {
    if (auto* walk = std::get_if<gridmpc::RandomWalkSpec>(&scenario.disturbances))
      walk->seed = static_cast<std::uint64_t>(seed_override);
    else
      std::cerr << "warning: --seed ignored, scenario uses a dense disturbance table\n";
  }

  if (out_dir.empty()) {
    if (const char* env = std::getenv("GRIDMPC_OUT")) out_dir = env;
    if (out_dir.empty()) out_dir = "out";
  }

  try {
    const gridmpc::RunLog log = gridmpc::run(scenario);
    gridmpc::write_run_outputs(log, scenario, out_dir);
    const auto& s = log.summary;
    std::cout << "run complete: " << log.steps.size() << " steps -> " << out_dir << "\n";
    std::cout << "  curtailed energy  " << s.curtailed_energy_mwh << " MWh\n";
    std::cout << "  battery throughput " << s.battery_throughput_mwh << " MWh\n";
    std::cout << "  max violation     " << s.max_violation_mw << " MW over "
              << s.violation_steps << " steps\n";
    if (s.solver_failures > 0)
      std::cout << "  solver failures   " << s.solver_failures << " (held previous move)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_ptdf(const std::string& path, const std::string& slack) {
  try {
    std::vector<std::string> warnings;
    const gridmpc::Zone zone = gridmpc::parse_network(load_json(path), slack, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    std::printf("%-24s", "line");
    for (const auto& node : zone.nodes) std::printf(" %12s", node.c_str());
    std::printf("\n");
    for (size_t l = 0; l < zone.lines.size(); ++l) {
      std::printf("%-24s", zone.lines[l].name().c_str());
      for (Eigen::Index c = 0; c < zone.ptdf.cols(); ++c)
        std::printf(" %12.6f", zone.ptdf(static_cast<Eigen::Index>(l), c));
      std::printf("\n");
    }
    return kExitOk;
  } catch (const gridmpc::ScenarioError& e) {
    std::cerr << "ptdf failed: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "ptdf failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Congestion-management MPC: scenario validation, closed-loop runs and "
               "PTDF tables"};
  app.require_subcommand(1);

  std::string path;
  std::string out_dir;
  std::string slack;
  std::string qp_dump;
  bool no_controller = false;
  long long seed = -1;

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("path", path, "scenario file (json)")->required();

  auto* runcmd = app.add_subcommand("run", "Run a scenario and write csv outputs");
  runcmd->add_option("path", path, "scenario file (json)")->required();
  runcmd->add_option("--out", out_dir, "output directory (default $GRIDMPC_OUT or ./out)");
  runcmd->add_flag("--no-controller", no_controller, "reference run with all orders zero");
  runcmd->add_option("--seed", seed, "override the random-walk seed");
  runcmd->add_option("--qp-dump", qp_dump, "replay file for failing solver instances");

  auto* ptdf = app.add_subcommand("ptdf", "Print the PTDF table computed from reactances");
  ptdf->add_option("path", path, "scenario file (json, network block required)")->required();
  ptdf->add_option("--slack", slack, "override the slack node");

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return cmd_validate(path);
  if (runcmd->parsed()) return cmd_run(path, out_dir, no_controller, seed, qp_dump);
  if (ptdf->parsed()) return cmd_ptdf(path, slack);
  return kExitRuntime;
}
