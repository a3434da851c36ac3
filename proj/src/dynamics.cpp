#include "gridmpc/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace gridmpc {

std::vector<std::string> DelayConfig::check() const {
  std::vector<std::string> violations;
  if (dt_s <= 0.0) violations.push_back("dt_s must be > 0");
  if (tau_curt_s < 0.0) violations.push_back("tau_curt_s must be >= 0");
  if (tau_batt_s < 0.0) violations.push_back("tau_batt_s must be >= 0");
  if (violations.empty() && d_curt() < d_batt())
    violations.push_back("curtailment delay must not be shorter than the battery delay");
  return violations;
}

SystemState SystemState::zero(const ZoneDims& dims) {
  SystemState s;
  s.flows = Eigen::VectorXd::Zero(dims.n_lines);
  s.battery_energy = Eigen::VectorXd::Zero(dims.n_batteries);
  s.curtailment = Eigen::VectorXd::Zero(dims.n_curtailable);
  s.battery_power = Eigen::VectorXd::Zero(dims.n_batteries);
  return s;
}

Eigen::VectorXd SystemState::to_vector() const {
  Eigen::VectorXd x(flows.size() + battery_energy.size() + curtailment.size() +
                    battery_power.size());
  x << flows, battery_energy, curtailment, battery_power;
  return x;
}

SystemState SystemState::from_vector(const Eigen::VectorXd& x, const ZoneDims& dims) {
  if (x.size() != dims.n_states())
    throw std::invalid_argument("SystemState: vector length does not match zone dimensions");
  SystemState s;
  s.flows = x.segment(dims.flow_offset(), dims.n_lines);
  s.battery_energy = x.segment(dims.energy_offset(), dims.n_batteries);
  s.curtailment = x.segment(dims.curtail_offset(), dims.n_curtailable);
  s.battery_power = x.segment(dims.power_offset(), dims.n_batteries);
  return s;
}

StateSpaceModel build_model(const Zone& zone, const DelayConfig& delays) {
  {
    const auto issues = delays.check();
    if (!issues.empty()) throw std::runtime_error("build_model: " + issues.front());
  }
  const ZoneDims dims = zone.dims();
  const int n = dims.n_states();
  const double dt_h = delays.dt_hours();

  StateSpaceModel m;
  m.dims = dims;
  m.dt_s = delays.dt_s;

  m.A = Eigen::MatrixXd::Identity(n, n);
  for (int b = 0; b < dims.n_batteries; ++b)
    m.A(dims.energy_offset() + b, dims.power_offset() + b) = dt_h;

  const auto batt_idx = zone.battery_indices();
  const auto curt_idx = zone.curtailable_indices();

  m.B_curt = Eigen::MatrixXd::Zero(n, dims.n_curtailable);
  for (int c = 0; c < dims.n_curtailable; ++c) {
    m.B_curt.block(dims.flow_offset(), c, dims.n_lines, 1) = -zone.ptdf.col(curt_idx[c]);
    m.B_curt(dims.curtail_offset() + c, c) = 1.0;
  }

  m.B_batt = Eigen::MatrixXd::Zero(n, dims.n_batteries);
  for (int b = 0; b < dims.n_batteries; ++b) {
    m.B_batt.block(dims.flow_offset(), b, dims.n_lines, 1) = -zone.ptdf.col(batt_idx[b]);
    m.B_batt(dims.energy_offset() + b, b) = dt_h;
    m.B_batt(dims.power_offset() + b, b) = 1.0;
  }

  m.B_w = Eigen::MatrixXd::Zero(n, dims.n_nodes);
  m.B_w.topRows(dims.n_lines) = zone.ptdf;

  return m;
}

SystemState step(const StateSpaceModel& model, const SystemState& state,
                 const Eigen::VectorXd& u_curt_effective,
                 const Eigen::VectorXd& u_batt_effective, const Eigen::VectorXd& w) {
  if (u_curt_effective.size() != model.dims.n_curtailable ||
      u_batt_effective.size() != model.dims.n_batteries || w.size() != model.dims.n_nodes)
    throw std::invalid_argument("step: input dimensions do not match the model");
  const Eigen::VectorXd x = state.to_vector();
  if (x.size() != model.n_states())
    throw std::invalid_argument("step: state dimensions do not match the model");
  const Eigen::VectorXd x_next = model.A * x + model.B_curt * u_curt_effective +
                                 model.B_batt * u_batt_effective + model.B_w * w;
  return SystemState::from_vector(x_next, model.dims);
}

OrderBuffer::OrderBuffer(int d_curt, int d_batt, int n_curt, int n_batt)
    : d_curt_(d_curt), d_batt_(d_batt) {
  if (d_curt < 0 || d_batt < 0) throw std::invalid_argument("OrderBuffer: negative delay");
  for (int i = 0; i < d_curt; ++i) queue_curt_.push_back(Eigen::VectorXd::Zero(n_curt));
  for (int i = 0; i < d_batt; ++i) queue_batt_.push_back(Eigen::VectorXd::Zero(n_batt));
}

OrderBuffer::Effective OrderBuffer::push(const Eigen::VectorXd& u_curt,
                                         const Eigen::VectorXd& u_batt) {
  Effective eff;
  if (d_curt_ == 0) {
    eff.curt = u_curt;
  } else {
    queue_curt_.push_back(u_curt);
    eff.curt = queue_curt_.front();
    queue_curt_.pop_front();
  }
  if (d_batt_ == 0) {
    eff.batt = u_batt;
  } else {
    queue_batt_.push_back(u_batt);
    eff.batt = queue_batt_.front();
    queue_batt_.pop_front();
  }
  return eff;
}

std::vector<Eigen::VectorXd> OrderBuffer::pending_curt() const {
  return {queue_curt_.begin(), queue_curt_.end()};
}

std::vector<Eigen::VectorXd> OrderBuffer::pending_batt() const {
  return {queue_batt_.begin(), queue_batt_.end()};
}

}  // namespace gridmpc
