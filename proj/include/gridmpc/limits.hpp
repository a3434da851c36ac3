#pragma once

#include <Eigen/Dense>

#include <vector>

#include "gridmpc/zone.hpp"

namespace gridmpc {

// One step of a post-incident overload schedule: `overload_mw` above the
// thermal limit is tolerated for `duration_s` seconds.
struct StairStep {
  double duration_s = 0.0;
  double overload_mw = 0.0;
};

// Right-continuous, nonincreasing overload schedule. Time past the listed
// steps means no overload is tolerated (back to the thermal limit), so the
// schedule always ends at zero.
class Stairway {
 public:
  Stairway() = default;
  explicit Stairway(std::vector<StairStep> steps);  // throws on a bad schedule

  // Tolerated overload at `dt_s` seconds after the incident (right-continuous:
  // at a step edge the next, tighter value applies). Negative time → 0.
  double overload_at(double dt_s) const;

  const std::vector<StairStep>& steps() const { return steps_; }
  bool empty() const { return steps_.empty(); }

 private:
  std::vector<StairStep> steps_;
};

// Time-varying flow bound for one line.
//
// Normal mode:   bound = thermal_limit - margin (constant).
// Incident mode: bound(t) = thermal_limit + stairway(t - incident_time); the
//                margin no longer applies, the stairway encodes the tolerated
//                excursion and decays back to the bare thermal limit.
class LimitProfile {
 public:
  enum class Mode { Normal, Incident };

  LimitProfile(double thermal_limit_mw, double margin_mw, Stairway stairway = {});

  double limit_at(double t_s) const;  // MW bound at absolute time t_s

  Mode mode() const { return mode_; }
  double thermal_limit() const { return thermal_limit_; }
  double margin() const { return margin_; }
  double incident_time() const;  // throws unless in Incident mode
  const Stairway& stairway() const { return stairway_; }

  friend LimitProfile trigger_incident(const LimitProfile& profile, double t_s);
  friend LimitProfile trigger_incident(const LimitProfile& profile, double t_s,
                                       Stairway stairway);

 private:
  Mode mode_ = Mode::Normal;
  double thermal_limit_ = 0.0;
  double margin_ = 0.0;
  double incident_time_ = 0.0;
  Stairway stairway_;
};

// Switches a Normal profile to Incident mode at absolute time t_s, using the
// profile's own stairway (first form) or the one carried by the event (second
// form). One incident per line per run: triggering twice is an error.
LimitProfile trigger_incident(const LimitProfile& profile, double t_s);
LimitProfile trigger_incident(const LimitProfile& profile, double t_s, Stairway stairway);

// Static device limits: battery energy/power boxes and per-node curtailment
// caps. Curtailment is bounded below by zero everywhere.
struct DeviceBounds {
  Eigen::VectorXd energy_min;   // MWh, per battery
  Eigen::VectorXd energy_max;   // MWh
  Eigen::VectorXd power_min;    // MW, per battery (negative = discharge bound)
  Eigen::VectorXd power_max;    // MW
  Eigen::VectorXd curtail_max;  // MW, per curtailable node

  std::vector<std::string> check(const ZoneDims& dims) const;  // violations, empty = ok
};

// Row layout of the stacked constraint rows over the state vector
// [flows; energies; curtailments; battery powers]:
//
//   core block                       extension
//   [0,   nL)  +F  <= L(t)           [core, core+nC)  -Pcurt <= 0
//   [nL, 2nL)  -F  <= L(t)
//   ... nB     -E  <= -E_min
//   ... nB     +E  <=  E_max
//   ... nC     +Pcurt <= Pcurt_max
//   ... nB     -Pbatt <= -Pbatt_min
//   ... nB     +Pbatt <=  Pbatt_max
//
// The core block mirrors the classic form with per-line absolute-value bounds
// expanded into two one-sided rows; the extension adds the explicit
// curtailment lower bound.
struct ConstraintRowLayout {
  int n_lines = 0;
  int n_batteries = 0;
  int n_curtailable = 0;

  int flow_plus() const { return 0; }
  int flow_minus() const { return n_lines; }
  int energy_lo() const { return 2 * n_lines; }
  int energy_hi() const { return 2 * n_lines + n_batteries; }
  int curtail_hi() const { return 2 * n_lines + 2 * n_batteries; }
  int power_lo() const { return 2 * n_lines + 2 * n_batteries + n_curtailable; }
  int power_hi() const { return 2 * n_lines + 3 * n_batteries + n_curtailable; }
  int curtail_lo() const { return core_rows(); }
  int core_rows() const { return 2 * n_lines + 4 * n_batteries + n_curtailable; }
  int total_rows() const { return core_rows() + n_curtailable; }
};

// Constraint data for one receding-horizon window: constant row matrices plus
// the time-varying right-hand side H0 evaluated at each step of the window.
//
// Hx are pure state rows; Hu_curt / Hu_batt carry the one-step input coupling
// so the same rows can be read as `Hx x^k + Hu_c u_curt^k + Hu_b u_batt^k <=
// rhs` when stepping device bounds by hand.
struct ConstraintSet {
  ConstraintRowLayout layout;
  Eigen::MatrixXd Hx;       // total_rows x n_states
  Eigen::MatrixXd Hu_curt;  // total_rows x n_curtailable
  Eigen::MatrixXd Hu_batt;  // total_rows x n_batteries
  DeviceBounds bounds;
  Eigen::MatrixXd flow_limit;  // (horizon+1) x n_lines; row t = bound at step k+t
  int first_step = 0;          // k
  int horizon = 0;             // N
  double dt_s = 0.0;

  // Right-hand side H0 at horizon offset t in [0, horizon].
  Eigen::VectorXd rhs(int t) const;
};

// Builds the constraint slice for steps k..k+horizon. Flow rows evaluate each
// line's profile at absolute time (k+t)*dt_s; device rows are constant.
// Throws std::runtime_error on infeasible static bounds or a profile/line
// count mismatch.
ConstraintSet build_constraints(const Zone& zone, const std::vector<LimitProfile>& profiles,
                                const DeviceBounds& bounds, int k, int horizon, double dt_s);

}  // namespace gridmpc
