#pragma once

#include <Eigen/Dense>

#include <vector>

#include "gridmpc/dynamics.hpp"
#include "gridmpc/limits.hpp"
#include "gridmpc/qp.hpp"
#include "gridmpc/zone.hpp"

namespace gridmpc {

// Quadratic cost configuration.
//
// Stage cost      J1 = sum_{t=1..N}   |x^{k+t} - x_ref|^2_Q1
// Control cost    J2 = sum_{t=0..N-1} |u^{k+t}|^2_Q2
// Slack penalty   Js = slack_weight * sum (eps^2 + eps)
//
// Q1 and Q2 are diagonal. The slack penalty carries a linear term on top of
// the quadratic one so it acts as an exact penalty: for any multiplier the
// flow constraints can generate at these weight scales, a feasible problem
// keeps every eps at zero instead of trading a small violation against input
// effort. Curtailment inputs must cost more than battery inputs.
struct CostConfig {
  Eigen::VectorXd q1;       // diagonal state weights, length n_states
  Eigen::VectorXd q2_curt;  // per curtailment input
  Eigen::VectorXd q2_batt;  // per battery input
  Eigen::VectorXd x_ref;    // state reference, length n_states
  double slack_weight = 1e6;

  // Battery input weight 1, curtailment 100, battery-energy reference weight
  // 0.01 toward `energy_ref` MWh, everything else 0.
  static CostConfig defaults(const ZoneDims& dims, double energy_ref_mwh = 0.0);

  std::vector<std::string> check(const ZoneDims& dims) const;
};

// Parameters the optimization is solved against: measured state and
// disturbance plus the orders already in the pipeline.
struct MpcParameters {
  SystemState x_k;
  Eigen::VectorXd w_k;
  std::vector<Eigen::VectorXd> pending_curt;  // oldest first, length d_curt
  std::vector<Eigen::VectorXd> pending_batt;  // oldest first, length d_batt
};

// Condensed problem over z = [U_curt; U_batt; eps]: states are eliminated
// through the dynamics, so the QP touches only inputs and slacks.
struct MpcProblem {
  int horizon = 0;
  ZoneDims dims;
  int d_curt = 0;
  int d_batt = 0;
  qp::Instance instance;
  double objective_offset = 0.0;  // constant cost term dropped from the QP
  MpcParameters params;
  Eigen::MatrixXd flow_limit;        // (N+1) x nL slice used for the rhs
  std::vector<int> step_row_offset;  // first constraint row of each t = 1..N

  int num_vars() const { return instance.num_vars(); }
  int curt_offset() const { return 0; }
  int batt_offset() const { return horizon * dims.n_curtailable; }
  int slack_offset() const { return horizon * (dims.n_curtailable + dims.n_batteries); }
};

struct MpcSolution {
  Eigen::VectorXd u_curt;     // first move
  Eigen::VectorXd u_batt;
  Eigen::MatrixXd plan_curt;  // N x nC, row t = order issued at step k+t
  Eigen::MatrixXd plan_batt;  // N x nB
  Eigen::MatrixXd slack;      // N x nL, row t-1 = eps for predicted step k+t
  double objective = 0.0;     // J1 + J2 + Js at the optimum
  qp::Status status = qp::Status::NumericalFailure;
  qp::Residuals residuals;
  int iterations = 0;
  Eigen::VectorXd qp_z;       // raw solver point, kept for warm starts
  Eigen::VectorXd qp_lambda;
};

// Forward simulation of the candidate plans through the delayed dynamics:
// returns x^{k+1..k+N}. For the first d steps of each input class the
// effective order comes from the pending queue, afterwards from the
// candidate plan; the disturbance is held at its measured value w_k.
std::vector<SystemState> predict(const StateSpaceModel& model, const SystemState& x_k,
                                 const Eigen::VectorXd& w_k,
                                 const std::vector<Eigen::VectorXd>& pending_curt,
                                 const std::vector<Eigen::VectorXd>& pending_batt,
                                 const Eigen::MatrixXd& plan_curt,
                                 const Eigen::MatrixXd& plan_batt);

// Builds the condensed QP: flow rows are softened per line and step
// (|F| <= L + eps, eps >= 0), device rows stay hard, and rows the delayed
// inputs cannot influence are dropped. Always feasible by construction.
MpcProblem condense(const StateSpaceModel& model, const CostConfig& cost,
                    const ConstraintSet& constraints, const MpcParameters& params,
                    int horizon, int d_curt, int d_batt);

// Solves the condensed problem and unpacks the plan. With `warm` from the
// previous step's solution the solver typically needs only a few iterations.
MpcSolution solve_mpc(const MpcProblem& problem, qp::Solver& solver,
                      const qp::Settings& settings = {});
MpcSolution solve_mpc(const MpcProblem& problem, qp::Solver& solver,
                      const Eigen::VectorXd& warm_z, const Eigen::VectorXd& warm_lambda,
                      const qp::Settings& settings = {});

// Receding-horizon driver: builds the constraint slice, condenses, solves
// (warm-started), and falls back to holding the previous first move when the
// solver fails. One controller instance per simulation run.
class MpcController {
 public:
  MpcController(const Zone& zone, const DelayConfig& delays, const DeviceBounds& bounds,
                const CostConfig& cost, int horizon, qp::Settings qp_settings = {});

  struct Decision {
    Eigen::VectorXd u_curt;
    Eigen::VectorXd u_batt;
    MpcSolution solution;
    bool solver_ok = false;
    bool held = false;  // true when a failed solve repeated the previous move
  };
  Decision decide(const SystemState& x_k, const Eigen::VectorXd& w_k, const OrderBuffer& buffer,
                  const std::vector<LimitProfile>& profiles, int k);

  const StateSpaceModel& model() const { return model_; }

 private:
  Zone zone_;
  DelayConfig delays_;
  DeviceBounds bounds_;
  CostConfig cost_;
  int horizon_;
  qp::Settings qp_settings_;
  StateSpaceModel model_;
  qp::Solver solver_;
  bool have_warm_ = false;
  Eigen::VectorXd warm_z_;
  Eigen::VectorXd warm_lambda_;
  Eigen::VectorXd held_curt_;
  Eigen::VectorXd held_batt_;
};

}  // namespace gridmpc
