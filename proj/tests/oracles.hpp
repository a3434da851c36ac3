// Test-only reference implementations, kept independent of the library code
// paths they check.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "gridmpc/qp.hpp"
#include "gridmpc/zone.hpp"

namespace gridmpc::testing {

// DC power-flow solve over the full (singular) susceptance Laplacian using a
// least-squares decomposition: a different algebraic route than the library's
// reduced-matrix LU. Returns per-line flows for the given nodal injections
// (which must balance to zero, e.g. +1 at a node and -1 at the slack).
Eigen::VectorXd dc_flow_oracle(const std::vector<std::string>& nodes,
                               const std::vector<Line>& lines,
                               const Eigen::VectorXd& injections);

// Random connected network: a spanning tree plus a few extra edges, with
// reactances in [0.3, 2] and unit thermal limits.
struct RandomNetwork {
  std::vector<std::string> nodes;
  std::vector<Line> lines;
  int slack_index = 0;
};
RandomNetwork random_connected_network(std::mt19937_64& rng, int max_nodes = 10);

// Brute-force QP reference: enumerates every subset of constraint rows as a
// candidate active set, solves the equality-constrained KKT system, and keeps
// the primal- and dual-feasible candidate with the lowest objective.
struct EnumerationResult {
  bool found = false;
  Eigen::VectorXd z;
  double objective = 0.0;
};
EnumerationResult enumerate_qp_oracle(const qp::Instance& instance);

// Random strictly convex instance with a nonempty interior.
qp::Instance random_pd_instance(std::mt19937_64& rng, int max_vars = 6, int max_rows = 8);

// Static dispatch brute force: minimizes sum_i weight_i * q_i^2 over the grid
// q_i in {lo_i, lo_i + resolution, ...} subject to |f0 + effect * q| <= limit
// per line. `effect` maps lever values to flow changes.
struct DispatchResult {
  bool feasible = false;
  Eigen::VectorXd levers;
  double cost = 0.0;
};
DispatchResult dispatch_grid_search(const Eigen::VectorXd& f0, const Eigen::VectorXd& limit,
                                    const Eigen::MatrixXd& effect, const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi, const Eigen::VectorXd& weight,
                                    double resolution);

}  // namespace gridmpc::testing

#include "gridmpc/mpc.hpp"

namespace gridmpc::testing {

// Fully random condensation fixture: zone, delays, profiles, bounds, state,
// pending orders and disturbance.
struct RandomMpcCase {
  Zone zone;
  DelayConfig delays;
  DeviceBounds bounds;
  CostConfig cost;
  std::vector<LimitProfile> profiles;
  StateSpaceModel model;
  MpcParameters params;
  int horizon = 0;
  int k = 0;
};
RandomMpcCase random_mpc_case(std::mt19937_64& rng);

// Largest relative mismatch between the condensed problem and an explicit
// trajectory evaluation (objective and every constraint row) at `n_probes`
// random decision vectors.
double condensation_gap(const RandomMpcCase& c, std::mt19937_64& rng, int n_probes = 3);

// One-line fixture for slack behaviour: the flow bound drops beyond the
// actuation delay by `required_reduction`. With `hard_feasible` the levers
// cover the drop (analytic_gap = 0); otherwise analytic_gap is the exact
// residual excess the slack must absorb at the end of the horizon.
struct SlackCase {
  Zone zone;
  DelayConfig delays;
  DeviceBounds bounds;
  CostConfig cost;
  std::vector<LimitProfile> profiles;
  StateSpaceModel model;
  SystemState x0;
  int horizon = 0;
  double analytic_gap = 0.0;

  MpcProblem condense_at_origin() const;
};
SlackCase slack_exactness_case(std::mt19937_64& rng, bool hard_feasible);

}  // namespace gridmpc::testing
