#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gridmpc/dynamics.hpp"
#include "gridmpc/limits.hpp"
#include "gridmpc/mpc.hpp"
#include "gridmpc/zone.hpp"

namespace gridmpc {

// Incident trigger: at absolute time t_s the named line switches from its
// normal margin-backed bound to the given overload stairway.
struct IncidentEvent {
  double t_s = 0.0;
  int line = 0;  // index into zone.lines
  Stairway stairway;
};

// Seeded random-walk disturbance generator: every step adds an independent
// N(0, sigma) MW injection delta at each listed node (all nodes if empty).
struct RandomWalkSpec {
  std::uint64_t seed = 0;
  double sigma_mw = 0.0;
  std::vector<int> nodes;  // indices into zone.nodes
};

// Per-node-per-step injection deltas: either an explicit dense table
// (duration x n_nodes) or a generator spec.
using DisturbanceSpec = std::variant<Eigen::MatrixXd, RandomWalkSpec>;

struct ControllerConfig {
  DelayConfig delays;
  int horizon = 30;
  double weight_batt = 1.0;
  double weight_curt = 100.0;
  double weight_energy = 0.01;
  double slack_weight = 1e6;
  double energy_ref_mwh = 0.0;
  // Solver knobs; not part of the scenario file schema.
  int qp_max_iterations = 200;
  double qp_tolerance = 1e-6;
  std::string qp_dump_path;

  CostConfig cost(const ZoneDims& dims) const;
};

// Everything one closed-loop run needs. Battery power and curtailment start
// at zero; flows and energies are given.
struct Scenario {
  Zone zone;
  bool ptdf_supplied = false;  // true when the file carried an explicit ptdf block
  DeviceBounds bounds;
  ControllerConfig controller;
  Eigen::VectorXd initial_flows;   // MW per line
  Eigen::VectorXd initial_energy;  // MWh per battery
  int duration_steps = 0;
  DisturbanceSpec disturbances;
  std::vector<IncidentEvent> events;
  bool controller_enabled = true;

  std::vector<std::string> validate() const;  // violations, empty = ok
  // Dense duration x n_nodes table, generating it if needed.
  Eigen::MatrixXd disturbance_table() const;
};

// One logged step: the state the plant was in during step k, what the
// controller issued, what the pipeline released, and how the line bounds
// looked. eps_next is the slack the step-k solve allocated to the first
// predicted state (i.e. to step k+1).
struct StepRecord {
  int k = 0;
  double t_s = 0.0;
  SystemState state;
  Eigen::VectorXd order_curt;
  Eigen::VectorXd order_batt;
  Eigen::VectorXd effective_curt;
  Eigen::VectorXd effective_batt;
  Eigen::VectorXd limits;     // MW bound per line at t_s
  Eigen::VectorXd violation;  // max(0, |F| - limit) per line
  Eigen::VectorXd eps_next;   // controller slack for step k+1, per line
  qp::Status solver_status = qp::Status::Optimal;
  int solver_iterations = 0;
  double objective = 0.0;
  bool controller_active = false;
  bool held_move = false;
  bool clamped = false;  // plant had to saturate a device this step
};

struct RunSummary {
  double curtailed_energy_mwh = 0.0;
  double battery_throughput_mwh = 0.0;
  double max_violation_mw = 0.0;
  int violation_steps = 0;
  double violation_duration_s = 0.0;
  int solver_failures = 0;
};

struct RunLog {
  ZoneDims dims;
  double dt_s = 0.0;
  std::vector<StepRecord> steps;
  RunSummary summary;
};

// Closed-loop execution. Controller and plant both see the measured w^k; the
// controller freezes it across its prediction window while the plant applies
// the true series, so the two only disagree beyond one step ahead.
RunLog run(const Scenario& scenario);

// Recomputes the summary from the rows (violation threshold 1e-6 MW).
RunSummary score(const RunLog& log);

// Aligned per-step differences between two runs of equal shape (a - b).
struct RunComparison {
  Eigen::MatrixXd flow_diff;    // steps x n_lines
  Eigen::MatrixXd limit_diff;   // steps x n_lines
  Eigen::MatrixXd order_curt_diff;  // steps x n_curtailable
  Eigen::MatrixXd order_batt_diff;  // steps x n_batteries
};
RunComparison compare(const RunLog& a, const RunLog& b);

// Deterministic across platforms (Box-Muller over a fixed 64-bit engine).
Eigen::MatrixXd generate_random_walk(const RandomWalkSpec& spec, int steps, int n_nodes);

}  // namespace gridmpc
