#pragma once

#include <Eigen/Dense>

#include <deque>
#include <vector>

#include "gridmpc/zone.hpp"

namespace gridmpc {

// Sampling time and actuation delays. The discrete delay counts the whole
// steps between issuing an order and the step during which it acts:
// d = ceil(tau / dt) - 1, floored at zero.
struct DelayConfig {
  double dt_s = 2.0;
  double tau_curt_s = 45.0;
  double tau_batt_s = 1.0;

  int d_curt() const { return steps_for(tau_curt_s); }
  int d_batt() const { return steps_for(tau_batt_s); }
  double dt_hours() const { return dt_s / 3600.0; }

  std::vector<std::string> check() const;  // violations, empty = ok

 private:
  int steps_for(double tau_s) const {
    const int d = static_cast<int>(std::ceil(tau_s / dt_s)) - 1;
    return d < 0 ? 0 : d;
  }
};

// Plant state at one step: line flows, battery energies, curtailed amounts
// (>= 0, the power currently withheld) and battery powers (positive =
// charging, which withdraws from the grid).
struct SystemState {
  Eigen::VectorXd flows;           // MW, per line
  Eigen::VectorXd battery_energy;  // MWh, per battery
  Eigen::VectorXd curtailment;     // MW, per curtailable node
  Eigen::VectorXd battery_power;   // MW, per battery

  static SystemState zero(const ZoneDims& dims);

  Eigen::VectorXd to_vector() const;  // [flows; energies; curtailments; powers]
  static SystemState from_vector(const Eigen::VectorXd& x, const ZoneDims& dims);
};

// Aggregated linear dynamics x^{k+1} = A x^k + B_curt u + B_batt v + B_w w,
// where u and v are the *effective* (delay-expired) order deltas and w the
// per-node injection disturbance.
//
// Block structure over the state layout [F; E; Pcurt; Pbatt]:
//   A      = identity, plus dE = dt_h * Pbatt coupling in the energy rows
//            (energy integrates the post-update battery power);
//   B_curt = [-PTDF at curtailable nodes; 0; I; 0]
//   B_batt = [-PTDF at battery nodes; dt_h * I; 0; I]
//   B_w    = [ PTDF at all nodes; 0]
//
// The minus signs follow from the sign conventions: curtailing or charging
// withdraws generation-positive injection at the node, w adds it. dt_h is the
// sampling time in hours so energies stay in MWh.
struct StateSpaceModel {
  ZoneDims dims;
  double dt_s = 0.0;
  Eigen::MatrixXd A;       // n x n
  Eigen::MatrixXd B_curt;  // n x nC
  Eigen::MatrixXd B_batt;  // n x nB
  Eigen::MatrixXd B_w;     // n x nN

  int n_states() const { return dims.n_states(); }
};

StateSpaceModel build_model(const Zone& zone, const DelayConfig& delays);

// One plant step with effective inputs. Affine in (state, inputs, w);
// throws std::invalid_argument on dimension mismatch.
SystemState step(const StateSpaceModel& model, const SystemState& state,
                 const Eigen::VectorXd& u_curt_effective,
                 const Eigen::VectorXd& u_batt_effective, const Eigen::VectorXd& w);

// FIFO pipelines holding issued-but-not-yet-effective orders. Queue lengths
// are exactly d_curt and d_batt; push enqueues this step's orders and returns
// the ones whose delay has just expired. Initialized to zeros, so a fresh
// buffer releases nothing but zeros for the first d steps.
class OrderBuffer {
 public:
  OrderBuffer(int d_curt, int d_batt, int n_curt, int n_batt);

  struct Effective {
    Eigen::VectorXd curt;
    Eigen::VectorXd batt;
  };
  Effective push(const Eigen::VectorXd& u_curt, const Eigen::VectorXd& u_batt);

  // Orders in flight, oldest first: exactly the previously sent orders
  // [u^{k-d}, ..., u^{k-1}] the controller must treat as parameters.
  std::vector<Eigen::VectorXd> pending_curt() const;
  std::vector<Eigen::VectorXd> pending_batt() const;

  int d_curt() const { return d_curt_; }
  int d_batt() const { return d_batt_; }

 private:
  int d_curt_;
  int d_batt_;
  std::deque<Eigen::VectorXd> queue_curt_;
  std::deque<Eigen::VectorXd> queue_batt_;
};

}  // namespace gridmpc
