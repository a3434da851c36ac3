#include "gridmpc/run_output.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gridmpc {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

const char* status_label(const StepRecord& rec) {
  if (!rec.controller_active) return "off";
  if (rec.held_move) return "held";
  return qp::to_string(rec.solver_status);
}

}  // namespace

void write_run_outputs(const RunLog& log, const Scenario& scenario,
                       const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  fs::create_directories(dir / "plotdata");

  const Zone& zone = scenario.zone;
  const ZoneDims dims = log.dims;

  {
    auto out = open_out(dir / "run.csv");
    out << "step,t_s";
    for (const auto& line : zone.lines) {
      const std::string n = line.name();
      out << ",flow_MW[" << n << "],limit_MW[" << n << "],violation_MW[" << n << "],slack_MW["
          << n << "]";
    }
    for (const auto& node : zone.battery_nodes)
      out << ",p_MW[" << node << "],e_MWh[" << node << "]";
    for (const auto& node : zone.curtailable_nodes)
      out << ",p_curt_MW[" << node << "],order_MW[" << node << "]";
    out << ",solver_status\n";

    for (size_t k = 0; k < log.steps.size(); ++k) {
      const StepRecord& rec = log.steps[k];
      out << rec.k << "," << fmt(rec.t_s);
      for (int l = 0; l < dims.n_lines; ++l) {
        // slack allocated for this state by the previous step's solve
        const double slack = k > 0 ? log.steps[k - 1].eps_next(l) : 0.0;
        out << "," << fmt(rec.state.flows(l)) << "," << fmt(rec.limits(l)) << ","
            << fmt(rec.violation(l)) << "," << fmt(slack);
      }
      for (int b = 0; b < dims.n_batteries; ++b)
        out << "," << fmt(rec.state.battery_power(b)) << "," << fmt(rec.state.battery_energy(b));
      for (int c = 0; c < dims.n_curtailable; ++c)
        out << "," << fmt(rec.state.curtailment(c)) << "," << fmt(rec.order_curt(c));
      out << "," << status_label(rec) << "\n";
    }
  }

  {
    auto out = open_out(dir / "summary.txt");
    const RunSummary& s = log.summary;
    out << "duration_steps " << log.steps.size() << "\n";
    out << "dt_s " << fmt(log.dt_s) << "\n";
    out << "curtailed_energy_MWh " << fmt(s.curtailed_energy_mwh) << "\n";
    out << "battery_throughput_MWh " << fmt(s.battery_throughput_mwh) << "\n";
    out << "max_violation_MW " << fmt(s.max_violation_mw) << "\n";
    out << "violation_steps " << s.violation_steps << "\n";
    out << "violation_duration_s " << fmt(s.violation_duration_s) << "\n";
    out << "solver_failures " << s.solver_failures << "\n";
  }

  {
    auto out = open_out(dir / "plotdata" / "flows.csv");
    out << "series,t_s,value\n";
    for (const auto& rec : log.steps)
      for (int l = 0; l < dims.n_lines; ++l) {
        out << "flow:" << zone.lines[l].name() << "," << fmt(rec.t_s) << ","
            << fmt(rec.state.flows(l)) << "\n";
        out << "limit:" << zone.lines[l].name() << "," << fmt(rec.t_s) << ","
            << fmt(rec.limits(l)) << "\n";
      }
  }
  {
    auto out = open_out(dir / "plotdata" / "controls.csv");
    out << "series,t_s,value\n";
    for (const auto& rec : log.steps) {
      for (int c = 0; c < dims.n_curtailable; ++c) {
        out << "order_curt:" << zone.curtailable_nodes[c] << "," << fmt(rec.t_s) << ","
            << fmt(rec.order_curt(c)) << "\n";
        out << "p_curt:" << zone.curtailable_nodes[c] << "," << fmt(rec.t_s) << ","
            << fmt(rec.state.curtailment(c)) << "\n";
      }
      for (int b = 0; b < dims.n_batteries; ++b) {
        out << "order_batt:" << zone.battery_nodes[b] << "," << fmt(rec.t_s) << ","
            << fmt(rec.order_batt(b)) << "\n";
        out << "p_batt:" << zone.battery_nodes[b] << "," << fmt(rec.t_s) << ","
            << fmt(rec.state.battery_power(b)) << "\n";
      }
    }
  }
  {
    auto out = open_out(dir / "plotdata" / "battery.csv");
    out << "series,t_s,value\n";
    for (const auto& rec : log.steps)
      for (int b = 0; b < dims.n_batteries; ++b)
        out << "energy:" << zone.battery_nodes[b] << "," << fmt(rec.t_s) << ","
            << fmt(rec.state.battery_energy(b)) << "\n";
  }
}

}  // namespace gridmpc
