#include "gridmpc/limits.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gridmpc {

Stairway::Stairway(std::vector<StairStep> steps) : steps_(std::move(steps)) {
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& s : steps_) {
    if (!(s.duration_s > 0.0))
      throw std::runtime_error("stairway: step durations must be > 0 s");
    if (s.overload_mw < 0.0)
      throw std::runtime_error("stairway: overloads must be >= 0 MW");
    if (s.overload_mw > prev)
      throw std::runtime_error("stairway: overloads must be nonincreasing");
    prev = s.overload_mw;
  }
}

double Stairway::overload_at(double dt_s) const {
  if (dt_s < 0.0) return 0.0;
  double edge = 0.0;
  for (const auto& s : steps_) {
    edge += s.duration_s;
    if (dt_s < edge) return s.overload_mw;
  }
  return 0.0;
}

LimitProfile::LimitProfile(double thermal_limit_mw, double margin_mw, Stairway stairway)
    : thermal_limit_(thermal_limit_mw), margin_(margin_mw), stairway_(std::move(stairway)) {
  if (thermal_limit_mw <= 0.0)
    throw std::runtime_error("limit profile: thermal limit must be > 0 MW");
  if (margin_mw < 0.0) throw std::runtime_error("limit profile: margin must be >= 0 MW");
  if (thermal_limit_mw - margin_mw <= 0.0)
    throw std::runtime_error("limit profile: margin leaves no positive bound");
}

double LimitProfile::limit_at(double t_s) const {
  if (mode_ == Mode::Normal) return thermal_limit_ - margin_;
  return thermal_limit_ + stairway_.overload_at(t_s - incident_time_);
}

double LimitProfile::incident_time() const {
  if (mode_ != Mode::Incident)
    throw std::runtime_error("limit profile: no incident has been triggered");
  return incident_time_;
}

LimitProfile trigger_incident(const LimitProfile& profile, double t_s, Stairway stairway) {
  if (profile.mode_ == LimitProfile::Mode::Incident)
    throw std::runtime_error("limit profile: incident already triggered (one per line per run)");
  LimitProfile out = profile;
  out.mode_ = LimitProfile::Mode::Incident;
  out.incident_time_ = t_s;
  out.stairway_ = std::move(stairway);
  return out;
}

LimitProfile trigger_incident(const LimitProfile& profile, double t_s) {
  return trigger_incident(profile, t_s, profile.stairway_);
}

std::vector<std::string> DeviceBounds::check(const ZoneDims& dims) const {
  std::vector<std::string> violations;
  auto add = [&violations](const std::string& v) { violations.push_back(v); };
  auto expect = [&](const Eigen::VectorXd& v, int n, const char* field) {
    if (v.size() != n)
      add(std::string(field) + ": expected " + std::to_string(n) + " entries, got " +
          std::to_string(v.size()));
  };
  expect(energy_min, dims.n_batteries, "energy_min");
  expect(energy_max, dims.n_batteries, "energy_max");
  expect(power_min, dims.n_batteries, "power_min");
  expect(power_max, dims.n_batteries, "power_max");
  expect(curtail_max, dims.n_curtailable, "curtail_max");
  if (!violations.empty()) return violations;

  for (int b = 0; b < dims.n_batteries; ++b) {
    if (energy_min(b) > energy_max(b))
      add("battery " + std::to_string(b) + ": energy_min > energy_max");
    if (energy_min(b) < 0.0) add("battery " + std::to_string(b) + ": energy_min < 0");
    if (power_min(b) > power_max(b))
      add("battery " + std::to_string(b) + ": power_min > power_max");
  }
  for (int c = 0; c < dims.n_curtailable; ++c)
    if (curtail_max(c) < 0.0) add("curtailable " + std::to_string(c) + ": curtail_max < 0");
  return violations;
}

Eigen::VectorXd ConstraintSet::rhs(int t) const {
  if (t < 0 || t > horizon)
    throw std::invalid_argument("constraint rhs: step offset out of window");
  Eigen::VectorXd h0(layout.total_rows());
  const int nl = layout.n_lines;
  const int nb = layout.n_batteries;
  const int nc = layout.n_curtailable;
  h0.segment(layout.flow_plus(), nl) = flow_limit.row(t).transpose();
  h0.segment(layout.flow_minus(), nl) = flow_limit.row(t).transpose();
  h0.segment(layout.energy_lo(), nb) = -bounds.energy_min;
  h0.segment(layout.energy_hi(), nb) = bounds.energy_max;
  h0.segment(layout.curtail_hi(), nc) = bounds.curtail_max;
  h0.segment(layout.power_lo(), nb) = -bounds.power_min;
  h0.segment(layout.power_hi(), nb) = bounds.power_max;
  h0.segment(layout.curtail_lo(), nc).setZero();
  return h0;
}

ConstraintSet build_constraints(const Zone& zone, const std::vector<LimitProfile>& profiles,
                                const DeviceBounds& bounds, int k, int horizon, double dt_s) {
  const ZoneDims dims = zone.dims();
  if (static_cast<int>(profiles.size()) != dims.n_lines)
    throw std::runtime_error("build_constraints: need one limit profile per line");
  if (k < 0 || horizon < 1 || dt_s <= 0.0)
    throw std::runtime_error("build_constraints: bad window parameters");
  {
    const auto device_issues = bounds.check(dims);
    if (!device_issues.empty()) {
      std::ostringstream msg;
      msg << "build_constraints: infeasible device bounds:";
      for (const auto& v : device_issues) msg << " [" << v << "]";
      throw std::runtime_error(msg.str());
    }
  }

  ConstraintSet cs;
  cs.layout = ConstraintRowLayout{dims.n_lines, dims.n_batteries, dims.n_curtailable};
  cs.bounds = bounds;
  cs.first_step = k;
  cs.horizon = horizon;
  cs.dt_s = dt_s;

  const int rows = cs.layout.total_rows();
  const int nl = dims.n_lines;
  const int nb = dims.n_batteries;
  const int nc = dims.n_curtailable;
  cs.Hx = Eigen::MatrixXd::Zero(rows, dims.n_states());
  cs.Hu_curt = Eigen::MatrixXd::Zero(rows, nc);
  cs.Hu_batt = Eigen::MatrixXd::Zero(rows, nb);

  const auto& lay = cs.layout;
  for (int l = 0; l < nl; ++l) {
    cs.Hx(lay.flow_plus() + l, dims.flow_offset() + l) = 1.0;
    cs.Hx(lay.flow_minus() + l, dims.flow_offset() + l) = -1.0;
  }
  const double dt_h = dt_s / 3600.0;
  for (int b = 0; b < nb; ++b) {
    cs.Hx(lay.energy_lo() + b, dims.energy_offset() + b) = -1.0;
    cs.Hx(lay.energy_hi() + b, dims.energy_offset() + b) = 1.0;
    cs.Hx(lay.power_lo() + b, dims.power_offset() + b) = -1.0;
    cs.Hx(lay.power_hi() + b, dims.power_offset() + b) = 1.0;
    cs.Hu_batt(lay.energy_lo() + b, b) = -dt_h;
    cs.Hu_batt(lay.energy_hi() + b, b) = dt_h;
    cs.Hu_batt(lay.power_lo() + b, b) = -1.0;
    cs.Hu_batt(lay.power_hi() + b, b) = 1.0;
  }
  for (int c = 0; c < nc; ++c) {
    cs.Hx(lay.curtail_hi() + c, dims.curtail_offset() + c) = 1.0;
    cs.Hx(lay.curtail_lo() + c, dims.curtail_offset() + c) = -1.0;
    cs.Hu_curt(lay.curtail_hi() + c, c) = 1.0;
    cs.Hu_curt(lay.curtail_lo() + c, c) = -1.0;
  }

  cs.flow_limit.resize(horizon + 1, nl);
  for (int t = 0; t <= horizon; ++t)
    for (int l = 0; l < nl; ++l)
      cs.flow_limit(t, l) = profiles[l].limit_at((k + t) * dt_s);

  return cs;
}

}  // namespace gridmpc
