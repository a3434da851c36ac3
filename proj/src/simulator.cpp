#include "gridmpc/simulator.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gridmpc {

namespace {

constexpr double kViolationTol = 1e-6;  // MW

int event_step(double t_s, double dt_s) {
  return static_cast<int>(std::ceil(t_s / dt_s - 1e-9));
}

// Saturates the effective input deltas so the post-step device states stay in
// their boxes: the plant refuses to leave the physical envelope even if an
// order asks it to. Returns true when anything was saturated.
bool apply_plant_limits(const SystemState& state, const DeviceBounds& bounds, double dt_h,
                        Eigen::VectorXd& u_curt, Eigen::VectorXd& u_batt) {
  bool clamped = false;
  for (Eigen::Index c = 0; c < u_curt.size(); ++c) {
    const double target = state.curtailment(c) + u_curt(c);
    const double limited = std::clamp(target, 0.0, bounds.curtail_max(c));
    if (limited != target) {
      u_curt(c) = limited - state.curtailment(c);
      clamped = true;
    }
  }
  for (Eigen::Index b = 0; b < u_batt.size(); ++b) {
    const double target = state.battery_power(b) + u_batt(b);
    double limited = std::clamp(target, bounds.power_min(b), bounds.power_max(b));
    // keep the energy box as well: E' = E + dt_h * P'
    if (dt_h > 0.0) {
      limited = std::min(limited, (bounds.energy_max(b) - state.battery_energy(b)) / dt_h);
      limited = std::max(limited, (bounds.energy_min(b) - state.battery_energy(b)) / dt_h);
    }
    if (limited != target) {
      u_batt(b) = limited - state.battery_power(b);
      clamped = true;
    }
  }
  return clamped;
}

}  // namespace

CostConfig ControllerConfig::cost(const ZoneDims& dims) const {
  CostConfig c = CostConfig::defaults(dims, energy_ref_mwh);
  c.q2_batt.setConstant(weight_batt);
  c.q2_curt.setConstant(weight_curt);
  for (int b = 0; b < dims.n_batteries; ++b) c.q1(dims.energy_offset() + b) = weight_energy;
  c.slack_weight = slack_weight;
  return c;
}

std::vector<std::string> Scenario::validate() const {
  std::vector<std::string> violations = validate_zone(zone);
  const ZoneDims dims = zone.dims();
  for (const auto& v : bounds.check(dims)) violations.push_back("devices: " + v);
  for (const auto& v : controller.delays.check()) violations.push_back("controller: " + v);
  for (const auto& v : controller.cost(dims).check(dims))
    violations.push_back("controller: " + v);
  if (controller.horizon < std::max(controller.delays.d_curt(), controller.delays.d_batt()) ||
      controller.horizon < 1)
    violations.push_back("controller: horizon must cover the longest delay");
  if (initial_flows.size() != dims.n_lines)
    violations.push_back("initial_flows: expected one entry per line");
  if (initial_energy.size() != dims.n_batteries)
    violations.push_back("devices: expected one initial energy per battery");
  if (duration_steps < 1) violations.push_back("timeline: duration_steps must be >= 1");

  if (const auto* table = std::get_if<Eigen::MatrixXd>(&disturbances)) {
    if (table->rows() < duration_steps)
      violations.push_back("timeline: disturbance table shorter than the run");
    if (table->cols() != dims.n_nodes)
      violations.push_back("timeline: disturbance table needs one column per node");
  } else {
    const auto& rw = std::get<RandomWalkSpec>(disturbances);
    if (rw.sigma_mw < 0.0) violations.push_back("timeline: random walk sigma must be >= 0");
    for (int node : rw.nodes)
      if (node < 0 || node >= dims.n_nodes)
        violations.push_back("timeline: random walk node index out of range");
  }

  std::vector<bool> line_hit(dims.n_lines, false);
  for (const auto& ev : events) {
    if (ev.line < 0 || ev.line >= dims.n_lines) {
      violations.push_back("events: line index out of range");
      continue;
    }
    if (ev.t_s < 0.0 ||
        event_step(ev.t_s, controller.delays.dt_s) >= duration_steps)
      violations.push_back("events: time " + std::to_string(ev.t_s) + "s outside the run");
    if (line_hit[ev.line])
      violations.push_back("events: line '" + zone.lines[ev.line].name() +
                           "' triggered more than once");
    line_hit[ev.line] = true;
  }
  return violations;
}

Eigen::MatrixXd Scenario::disturbance_table() const {
  const ZoneDims dims = zone.dims();
  if (const auto* table = std::get_if<Eigen::MatrixXd>(&disturbances))
    return table->topRows(duration_steps);
  return generate_random_walk(std::get<RandomWalkSpec>(disturbances), duration_steps,
                              dims.n_nodes);
}

RunLog run(const Scenario& scenario) {
  {
    const auto issues = scenario.validate();
    if (!issues.empty()) {
      std::ostringstream msg;
      msg << "run: invalid scenario:";
      for (const auto& v : issues) msg << " [" << v << "]";
      throw std::runtime_error(msg.str());
    }
  }
  const ZoneDims dims = scenario.zone.dims();
  const DelayConfig& delays = scenario.controller.delays;
  const double dt_s = delays.dt_s;
  const double dt_h = delays.dt_hours();

  const StateSpaceModel model = build_model(scenario.zone, delays);
  const Eigen::MatrixXd w_table = scenario.disturbance_table();

  std::vector<LimitProfile> profiles;
  profiles.reserve(dims.n_lines);
  for (const auto& line : scenario.zone.lines)
    profiles.emplace_back(line.thermal_limit, line.margin);

  SystemState state = SystemState::zero(dims);
  state.flows = scenario.initial_flows;
  state.battery_energy = scenario.initial_energy;

  OrderBuffer buffer(delays.d_curt(), delays.d_batt(), dims.n_curtailable, dims.n_batteries);

  std::optional<MpcController> controller;
  if (scenario.controller_enabled) {
    qp::Settings qp_settings;
    qp_settings.tolerance = scenario.controller.qp_tolerance;
    qp_settings.max_iterations = scenario.controller.qp_max_iterations;
    qp_settings.dump_path = scenario.controller.qp_dump_path;
    controller.emplace(scenario.zone, delays, scenario.bounds,
                       scenario.controller.cost(dims), scenario.controller.horizon,
                       qp_settings);
  }

  RunLog log;
  log.dims = dims;
  log.dt_s = dt_s;
  log.steps.reserve(scenario.duration_steps);

  for (int k = 0; k < scenario.duration_steps; ++k) {
    for (const auto& ev : scenario.events)
      if (event_step(ev.t_s, dt_s) == k)
        profiles[ev.line] = trigger_incident(profiles[ev.line], ev.t_s, ev.stairway);

    const Eigen::VectorXd w = w_table.row(k).transpose();

    StepRecord rec;
    rec.k = k;
    rec.t_s = k * dt_s;
    rec.state = state;
    rec.limits.resize(dims.n_lines);
    rec.violation.resize(dims.n_lines);
    for (int l = 0; l < dims.n_lines; ++l) {
      rec.limits(l) = profiles[l].limit_at(rec.t_s);
      rec.violation(l) = std::max(0.0, std::abs(state.flows(l)) - rec.limits(l));
    }

    Eigen::VectorXd u_curt = Eigen::VectorXd::Zero(dims.n_curtailable);
    Eigen::VectorXd u_batt = Eigen::VectorXd::Zero(dims.n_batteries);
    rec.eps_next = Eigen::VectorXd::Zero(dims.n_lines);
    if (controller) {
      const auto decision = controller->decide(state, w, buffer, profiles, k);
      u_curt = decision.u_curt;
      u_batt = decision.u_batt;
      rec.controller_active = true;
      rec.held_move = decision.held;
      rec.solver_status = decision.solution.status;
      rec.solver_iterations = decision.solution.iterations;
      rec.objective = decision.solution.objective;
      if (decision.solution.slack.rows() > 0)
        rec.eps_next = decision.solution.slack.row(0).transpose();
    }
    rec.order_curt = u_curt;
    rec.order_batt = u_batt;

    auto effective = buffer.push(u_curt, u_batt);
    rec.clamped = apply_plant_limits(state, scenario.bounds, dt_h, effective.curt,
                                     effective.batt);
    rec.effective_curt = effective.curt;
    rec.effective_batt = effective.batt;

    state = step(model, state, effective.curt, effective.batt, w);
    log.steps.push_back(std::move(rec));
  }

  log.summary = score(log);
  return log;
}

RunSummary score(const RunLog& log) {
  RunSummary s;
  const double dt_h = log.dt_s / 3600.0;
  for (const auto& rec : log.steps) {
    s.curtailed_energy_mwh += rec.state.curtailment.sum() * dt_h;
    s.battery_throughput_mwh += rec.state.battery_power.cwiseAbs().sum() * dt_h;
    const double worst = rec.violation.size() > 0 ? rec.violation.maxCoeff() : 0.0;
    s.max_violation_mw = std::max(s.max_violation_mw, worst);
    if (worst > kViolationTol) ++s.violation_steps;
    if (rec.controller_active && rec.solver_status != qp::Status::Optimal) ++s.solver_failures;
  }
  s.violation_duration_s = s.violation_steps * log.dt_s;
  return s;
}

RunComparison compare(const RunLog& a, const RunLog& b) {
  if (a.steps.size() != b.steps.size() || a.dims.n_states() != b.dims.n_states())
    throw std::invalid_argument("compare: runs have different shapes");
  const int n = static_cast<int>(a.steps.size());
  RunComparison cmp;
  cmp.flow_diff.resize(n, a.dims.n_lines);
  cmp.limit_diff.resize(n, a.dims.n_lines);
  cmp.order_curt_diff.resize(n, a.dims.n_curtailable);
  cmp.order_batt_diff.resize(n, a.dims.n_batteries);
  for (int k = 0; k < n; ++k) {
    cmp.flow_diff.row(k) = (a.steps[k].state.flows - b.steps[k].state.flows).transpose();
    cmp.limit_diff.row(k) = (a.steps[k].limits - b.steps[k].limits).transpose();
    cmp.order_curt_diff.row(k) = (a.steps[k].order_curt - b.steps[k].order_curt).transpose();
    cmp.order_batt_diff.row(k) = (a.steps[k].order_batt - b.steps[k].order_batt).transpose();
  }
  return cmp;
}

Eigen::MatrixXd generate_random_walk(const RandomWalkSpec& spec, int steps, int n_nodes) {
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(steps, n_nodes);
  std::vector<int> nodes = spec.nodes;
  if (nodes.empty())
    for (int i = 0; i < n_nodes; ++i) nodes.push_back(i);

  std::mt19937_64 engine(spec.seed);
  // Box-Muller on fixed 53-bit uniforms: identical streams on every platform,
  // unlike std::normal_distribution.
  const auto uniform = [&engine]() {
    return (static_cast<double>(engine() >> 11) + 1.0) / 9007199254740993.0;  // (0, 1)
  };
  for (int k = 0; k < steps; ++k)
    for (int node : nodes) {
      const double u1 = uniform();
      const double u2 = uniform();
      table(k, node) = spec.sigma_mw * std::sqrt(-2.0 * std::log(u1)) *
                       std::cos(2.0 * std::numbers::pi * u2);
    }
  return table;
}

}  // namespace gridmpc
