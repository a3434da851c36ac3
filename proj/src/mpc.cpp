#include "gridmpc/mpc.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace gridmpc {

namespace {

constexpr double kHessianRegularization = 1e-9;

// A is the identity plus the energy<-power coupling, so A*M is M plus a few
// scaled rows. Applied in place.
void apply_A_inplace(const StateSpaceModel& model, Eigen::MatrixXd& m) {
  const auto& d = model.dims;
  const double dt_h = model.dt_s / 3600.0;
  for (int b = 0; b < d.n_batteries; ++b)
    m.row(d.energy_offset() + b) += dt_h * m.row(d.power_offset() + b);
}

void apply_A_inplace(const StateSpaceModel& model, Eigen::VectorXd& v) {
  const auto& d = model.dims;
  const double dt_h = model.dt_s / 3600.0;
  for (int b = 0; b < d.n_batteries; ++b)
    v(d.energy_offset() + b) += dt_h * v(d.power_offset() + b);
}

void check_pending(const std::vector<Eigen::VectorXd>& pending, int expected, int width,
                   const char* what) {
  if (static_cast<int>(pending.size()) != expected)
    throw std::invalid_argument(std::string("mpc: pending ") + what + " queue must hold exactly " +
                                std::to_string(expected) + " orders");
  for (const auto& u : pending)
    if (u.size() != width)
      throw std::invalid_argument(std::string("mpc: pending ") + what + " order width mismatch");
}

}  // namespace

CostConfig CostConfig::defaults(const ZoneDims& dims, double energy_ref_mwh) {
  CostConfig c;
  c.q1 = Eigen::VectorXd::Zero(dims.n_states());
  for (int b = 0; b < dims.n_batteries; ++b) c.q1(dims.energy_offset() + b) = 0.01;
  c.q2_curt = Eigen::VectorXd::Constant(dims.n_curtailable, 100.0);
  c.q2_batt = Eigen::VectorXd::Constant(dims.n_batteries, 1.0);
  c.x_ref = Eigen::VectorXd::Zero(dims.n_states());
  for (int b = 0; b < dims.n_batteries; ++b) c.x_ref(dims.energy_offset() + b) = energy_ref_mwh;
  c.slack_weight = 1e6;
  return c;
}

std::vector<std::string> CostConfig::check(const ZoneDims& dims) const {
  std::vector<std::string> violations;
  if (q1.size() != dims.n_states()) violations.push_back("q1 length != state dimension");
  if (q2_curt.size() != dims.n_curtailable) violations.push_back("q2_curt length mismatch");
  if (q2_batt.size() != dims.n_batteries) violations.push_back("q2_batt length mismatch");
  if (x_ref.size() != dims.n_states()) violations.push_back("x_ref length != state dimension");
  if (!violations.empty()) return violations;
  if (q1.minCoeff() < 0.0) violations.push_back("q1 entries must be >= 0");
  if (dims.n_curtailable > 0 && q2_curt.minCoeff() <= 0.0)
    violations.push_back("q2_curt entries must be > 0");
  if (dims.n_batteries > 0 && q2_batt.minCoeff() <= 0.0)
    violations.push_back("q2_batt entries must be > 0");
  if (slack_weight <= 0.0) violations.push_back("slack_weight must be > 0");
  if (dims.n_curtailable > 0 && dims.n_batteries > 0 &&
      q2_curt.minCoeff() <= q2_batt.maxCoeff())
    violations.push_back("curtailment inputs must cost more than battery inputs");
  return violations;
}

std::vector<SystemState> predict(const StateSpaceModel& model, const SystemState& x_k,
                                 const Eigen::VectorXd& w_k,
                                 const std::vector<Eigen::VectorXd>& pending_curt,
                                 const std::vector<Eigen::VectorXd>& pending_batt,
                                 const Eigen::MatrixXd& plan_curt,
                                 const Eigen::MatrixXd& plan_batt) {
  const int n_steps = static_cast<int>(plan_curt.rows());
  if (plan_batt.rows() != n_steps)
    throw std::invalid_argument("predict: candidate plans must cover the same horizon");
  if (plan_curt.cols() != model.dims.n_curtailable || plan_batt.cols() != model.dims.n_batteries)
    throw std::invalid_argument("predict: candidate plan width mismatch");
  const int d_curt = static_cast<int>(pending_curt.size());
  const int d_batt = static_cast<int>(pending_batt.size());
  check_pending(pending_curt, d_curt, model.dims.n_curtailable, "curtailment");
  check_pending(pending_batt, d_batt, model.dims.n_batteries, "battery");

  std::vector<SystemState> trajectory;
  trajectory.reserve(n_steps);
  SystemState x = x_k;
  for (int s = 0; s < n_steps; ++s) {
    const Eigen::VectorXd u_curt =
        s < d_curt ? pending_curt[s] : Eigen::VectorXd(plan_curt.row(s - d_curt).transpose());
    const Eigen::VectorXd u_batt =
        s < d_batt ? pending_batt[s] : Eigen::VectorXd(plan_batt.row(s - d_batt).transpose());
    x = step(model, x, u_curt, u_batt, w_k);
    trajectory.push_back(x);
  }
  return trajectory;
}

MpcProblem condense(const StateSpaceModel& model, const CostConfig& cost,
                    const ConstraintSet& constraints, const MpcParameters& params, int horizon,
                    int d_curt, int d_batt) {
  const ZoneDims dims = model.dims;
  const int n = dims.n_states();
  const int nl = dims.n_lines;
  const int nb = dims.n_batteries;
  const int nc = dims.n_curtailable;

  if (horizon < 1 || horizon < std::max(d_curt, d_batt))
    throw std::invalid_argument("mpc: horizon must be >= max(d_curt, d_batt) and >= 1");
  if (constraints.horizon != horizon)
    throw std::invalid_argument("mpc: constraint slice does not cover the horizon");
  {
    const auto issues = cost.check(dims);
    if (!issues.empty()) throw std::invalid_argument("mpc: bad cost config: " + issues.front());
  }
  check_pending(params.pending_curt, d_curt, nc, "curtailment");
  check_pending(params.pending_batt, d_batt, nb, "battery");
  if (params.w_k.size() != dims.n_nodes)
    throw std::invalid_argument("mpc: disturbance width mismatch");

  const int N = horizon;
  const int nu = N * (nc + nb);
  const int n_slack = N * nl;
  const int zdim = nu + n_slack;
  const int batt_off = N * nc;
  const int slack_off = nu;

  // Running prediction maps: x^{k+t} = free[t] + Gc[t] * Uc + Gb[t] * Ub.
  std::vector<Eigen::MatrixXd> gamma_c(N + 1), gamma_b(N + 1);
  std::vector<Eigen::VectorXd> free_part(N + 1);
  gamma_c[0] = Eigen::MatrixXd::Zero(n, N * nc);
  gamma_b[0] = Eigen::MatrixXd::Zero(n, N * nb);
  free_part[0] = params.x_k.to_vector();
  if (free_part[0].size() != n) throw std::invalid_argument("mpc: state dimension mismatch");
  const Eigen::VectorXd w_effect = model.B_w * params.w_k;
  for (int t = 1; t <= N; ++t) {
    gamma_c[t] = gamma_c[t - 1];
    apply_A_inplace(model, gamma_c[t]);
    if (t - 1 >= d_curt && nc > 0)
      gamma_c[t].block(0, (t - 1 - d_curt) * nc, n, nc) += model.B_curt;
    gamma_b[t] = gamma_b[t - 1];
    apply_A_inplace(model, gamma_b[t]);
    if (t - 1 >= d_batt && nb > 0)
      gamma_b[t].block(0, (t - 1 - d_batt) * nb, n, nb) += model.B_batt;
    free_part[t] = free_part[t - 1];
    apply_A_inplace(model, free_part[t]);
    if (t - 1 < d_curt) free_part[t] += model.B_curt * params.pending_curt[t - 1];
    if (t - 1 < d_batt) free_part[t] += model.B_batt * params.pending_batt[t - 1];
    free_part[t] += w_effect;
  }

  MpcProblem problem;
  problem.horizon = N;
  problem.dims = dims;
  problem.d_curt = d_curt;
  problem.d_batt = d_batt;
  problem.params = params;
  problem.flow_limit = constraints.flow_limit;

  // Objective.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(zdim, zdim);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(zdim);
  double offset = 0.0;
  for (int j = 0; j < N; ++j) {
    for (int c = 0; c < nc; ++c) H(j * nc + c, j * nc + c) += 2.0 * cost.q2_curt(c);
    for (int b = 0; b < nb; ++b)
      H(batt_off + j * nb + b, batt_off + j * nb + b) += 2.0 * cost.q2_batt(b);
  }
  for (int i = 0; i < n_slack; ++i) {
    H(slack_off + i, slack_off + i) += 2.0 * cost.slack_weight;
    g(slack_off + i) += cost.slack_weight;
  }
  std::vector<int> weighted_states;
  for (int i = 0; i < n; ++i)
    if (cost.q1(i) > 0.0) weighted_states.push_back(i);
  Eigen::VectorXd row(nu);
  for (int t = 1; t <= N; ++t) {
    for (int i : weighted_states) {
      row.head(N * nc) = gamma_c[t].row(i);
      row.tail(N * nb) = gamma_b[t].row(i);
      const double err = free_part[t](i) - cost.x_ref(i);
      const double q = cost.q1(i);
      H.topLeftCorner(nu, nu).selfadjointView<Eigen::Lower>().rankUpdate(row, 2.0 * q);
      g.head(nu) += 2.0 * q * err * row;
      offset += q * err * err;
    }
  }
  H.topLeftCorner(nu, nu).triangularView<Eigen::StrictlyUpper>() =
      H.topLeftCorner(nu, nu).transpose();
  H.diagonal().array() += kHessianRegularization;
  problem.objective_offset = offset;

  // Constraint rows, grouped per step. Device rows the delayed inputs cannot
  // reach yet are dropped: their left-hand side over z is structurally zero
  // and the pipeline already satisfied them when the orders were issued.
  int rows = 0;
  for (int t = 1; t <= N; ++t) {
    rows += 3 * nl;  // flow pair + slack nonnegativity
    if (t > d_batt) rows += 4 * nb;
    if (t > d_curt) rows += 2 * nc;
  }
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows, zdim);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(rows);
  problem.step_row_offset.assign(N + 1, 0);

  int r = 0;
  for (int t = 1; t <= N; ++t) {
    problem.step_row_offset[t] = r;
    const auto state_row = [&](int i) {
      Eigen::RowVectorXd out(zdim);
      out.setZero();
      out.head(N * nc) = gamma_c[t].row(i);
      out.segment(batt_off, N * nb) = gamma_b[t].row(i);
      return out;
    };
    for (int l = 0; l < nl; ++l) {
      const int eps_col = slack_off + (t - 1) * nl + l;
      const Eigen::RowVectorXd flow = state_row(dims.flow_offset() + l);
      G.row(r) = flow;
      G(r, eps_col) -= 1.0;
      h(r) = constraints.flow_limit(t, l) - free_part[t](dims.flow_offset() + l);
      ++r;
      G.row(r) = -flow;
      G(r, eps_col) -= 1.0;
      h(r) = constraints.flow_limit(t, l) + free_part[t](dims.flow_offset() + l);
      ++r;
    }
    if (t > d_batt) {
      for (int b = 0; b < nb; ++b) {
        const int i = dims.energy_offset() + b;
        G.row(r) = -state_row(i);
        h(r) = -constraints.bounds.energy_min(b) + free_part[t](i);
        ++r;
        G.row(r) = state_row(i);
        h(r) = constraints.bounds.energy_max(b) - free_part[t](i);
        ++r;
      }
      for (int b = 0; b < nb; ++b) {
        const int i = dims.power_offset() + b;
        G.row(r) = -state_row(i);
        h(r) = -constraints.bounds.power_min(b) + free_part[t](i);
        ++r;
        G.row(r) = state_row(i);
        h(r) = constraints.bounds.power_max(b) - free_part[t](i);
        ++r;
      }
    }
    if (t > d_curt) {
      for (int c = 0; c < nc; ++c) {
        const int i = dims.curtail_offset() + c;
        G.row(r) = state_row(i);
        h(r) = constraints.bounds.curtail_max(c) - free_part[t](i);
        ++r;
        G.row(r) = -state_row(i);
        h(r) = free_part[t](i);
        ++r;
      }
    }
    for (int l = 0; l < nl; ++l) {
      G(r, slack_off + (t - 1) * nl + l) = -1.0;
      h(r) = 0.0;
      ++r;
    }
  }
  assert(r == rows);

  problem.instance.H = std::move(H);
  problem.instance.g = std::move(g);
  problem.instance.G = std::move(G);
  problem.instance.h = std::move(h);
  return problem;
}

namespace {

MpcSolution unpack(const MpcProblem& problem, const qp::Result& result) {
  const int N = problem.horizon;
  const int nc = problem.dims.n_curtailable;
  const int nb = problem.dims.n_batteries;
  const int nl = problem.dims.n_lines;
  MpcSolution sol;
  sol.plan_curt.resize(N, nc);
  sol.plan_batt.resize(N, nb);
  sol.slack.resize(N, nl);
  for (int t = 0; t < N; ++t) {
    sol.plan_curt.row(t) = result.z.segment(problem.curt_offset() + t * nc, nc).transpose();
    sol.plan_batt.row(t) = result.z.segment(problem.batt_offset() + t * nb, nb).transpose();
    sol.slack.row(t) = result.z.segment(problem.slack_offset() + t * nl, nl).transpose();
  }
  sol.u_curt = sol.plan_curt.row(0).transpose();
  sol.u_batt = sol.plan_batt.row(0).transpose();
  sol.objective = result.objective + problem.objective_offset;
  sol.status = result.status;
  sol.residuals = result.residuals;
  sol.iterations = result.iterations;
  sol.qp_z = result.z;
  sol.qp_lambda = result.lambda;
  return sol;
}

}  // namespace

MpcSolution solve_mpc(const MpcProblem& problem, qp::Solver& solver,
                      const qp::Settings& settings) {
  return unpack(problem, solver.solve(problem.instance, settings));
}

MpcSolution solve_mpc(const MpcProblem& problem, qp::Solver& solver,
                      const Eigen::VectorXd& warm_z, const Eigen::VectorXd& warm_lambda,
                      const qp::Settings& settings) {
  return unpack(problem, solver.warm_start(problem.instance, warm_z, warm_lambda, settings));
}

MpcController::MpcController(const Zone& zone, const DelayConfig& delays,
                             const DeviceBounds& bounds, const CostConfig& cost, int horizon,
                             qp::Settings qp_settings)
    : zone_(zone),
      delays_(delays),
      bounds_(bounds),
      cost_(cost),
      horizon_(horizon),
      qp_settings_(std::move(qp_settings)),
      model_(build_model(zone, delays)) {
  if (horizon_ < std::max(delays_.d_curt(), delays_.d_batt()) || horizon_ < 1)
    throw std::invalid_argument("mpc: horizon must cover the longest delay");
  held_curt_ = Eigen::VectorXd::Zero(model_.dims.n_curtailable);
  held_batt_ = Eigen::VectorXd::Zero(model_.dims.n_batteries);
}

MpcController::Decision MpcController::decide(const SystemState& x_k, const Eigen::VectorXd& w_k,
                                              const OrderBuffer& buffer,
                                              const std::vector<LimitProfile>& profiles, int k) {
  const ConstraintSet constraints =
      build_constraints(zone_, profiles, bounds_, k, horizon_, delays_.dt_s);
#ifndef NDEBUG
  for (int t = 0; t <= horizon_; ++t)
    for (int l = 0; l < model_.dims.n_lines; ++l)
      assert(constraints.flow_limit(t, l) == profiles[l].limit_at((k + t) * delays_.dt_s));
#endif

  MpcParameters params;
  params.x_k = x_k;
  params.w_k = w_k;
  params.pending_curt = buffer.pending_curt();
  params.pending_batt = buffer.pending_batt();

  const MpcProblem problem = condense(model_, cost_, constraints, params, horizon_,
                                      delays_.d_curt(), delays_.d_batt());

  MpcSolution sol;
  if (have_warm_ && warm_z_.size() == problem.num_vars() &&
      warm_lambda_.size() == problem.instance.num_rows())
    sol = solve_mpc(problem, solver_, warm_z_, warm_lambda_, qp_settings_);
  else
    sol = solve_mpc(problem, solver_, qp_settings_);

  Decision decision;
  decision.solution = sol;
  if (sol.status == qp::Status::Optimal) {
    decision.u_curt = sol.u_curt;
    decision.u_batt = sol.u_batt;
    decision.solver_ok = true;
    held_curt_ = sol.u_curt;
    held_batt_ = sol.u_batt;
    // Warm-start the next step from this optimum.
    warm_z_ = sol.qp_z;
    warm_lambda_ = sol.qp_lambda;
    have_warm_ = true;
  } else {
    // Fail-operational: hold the previous first move, let the caller log it.
    decision.u_curt = held_curt_;
    decision.u_batt = held_batt_;
    decision.solver_ok = false;
    decision.held = true;
    have_warm_ = false;
  }
  return decision;
}

}  // namespace gridmpc
