#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridmpc/limits.hpp"
#include "test_common.hpp"

using namespace gridmpc;

namespace {

Stairway one_minute_15mw() { return Stairway({{60.0, 15.0}}); }

}  // namespace

TEST_CASE("normal mode bound is thermal minus margin, constant") {
  const LimitProfile profile(100.0, 5.0);
  CHECK(profile.limit_at(0.0) == 95.0);
  CHECK(profile.limit_at(1e6) == 95.0);
  CHECK(profile.mode() == LimitProfile::Mode::Normal);
}

TEST_CASE("incident stairway: 15 MW tolerated for one minute") {
  LimitProfile profile(80.0, 2.0);
  profile = trigger_incident(profile, 0.0, one_minute_15mw());
  CHECK(profile.limit_at(30.0) == 95.0);
  CHECK(profile.limit_at(61.0) == 80.0);
}

TEST_CASE("stairway edges are right-continuous") {
  LimitProfile profile(80.0, 2.0);
  profile = trigger_incident(profile, 0.0, Stairway({{60.0, 15.0}, {60.0, 7.0}}));
  CHECK(profile.limit_at(59.999) == 95.0);
  CHECK(profile.limit_at(60.0) == 87.0);  // the tighter bound applies at the edge
  CHECK(profile.limit_at(120.0) == 80.0);
  CHECK(profile.limit_at(-1.0) == 80.0);  // before the incident time offset
}

TEST_CASE("trigger transitions and double trigger") {
  const LimitProfile normal(80.0, 2.0, one_minute_15mw());
  CHECK(normal.limit_at(0.0) == 78.0);

  const LimitProfile incident = trigger_incident(normal, 10.0);
  CHECK(incident.mode() == LimitProfile::Mode::Incident);
  CHECK(incident.incident_time() == 10.0);
  CHECK(incident.limit_at(10.0) == 95.0);  // margin no longer applies
  CHECK(incident.limit_at(75.0) == 80.0);

  CHECK_THROWS_AS(trigger_incident(incident, 20.0), std::runtime_error);
}

TEST_CASE("incident bound is nonincreasing and reaches the thermal limit") {
  LimitProfile profile(70.0, 1.0);
  profile = trigger_incident(profile, 5.0, Stairway({{30.0, 20.0}, {30.0, 12.0}, {60.0, 4.0}}));
  double prev = std::numeric_limits<double>::infinity();
  for (double t = 5.0; t < 200.0; t += 0.5) {
    const double bound = profile.limit_at(t);
    CHECK(bound <= prev);
    CHECK(bound > 0.0);
    prev = bound;
  }
  CHECK(profile.limit_at(5.0 + 130.0) == 70.0);
}

TEST_CASE("bad stairways are rejected") {
  CHECK_THROWS_AS(Stairway({{60.0, 5.0}, {60.0, 9.0}}), std::runtime_error);  // increasing
  CHECK_THROWS_AS(Stairway({{0.0, 5.0}}), std::runtime_error);               // zero duration
  CHECK_THROWS_AS(Stairway({{60.0, -1.0}}), std::runtime_error);             // negative
}

TEST_CASE("build_constraints row counts follow the block structure") {
  // 22 lines, 1 battery, 11 curtailable: flow pairs + energy pair +
  // curtailment upper + power pair, then the explicit curtailment lower rows.
  ConstraintRowLayout layout{22, 1, 11};
  CHECK(layout.core_rows() == 2 * 22 + 2 * 1 + 11 + 2 * 1);
  CHECK(layout.total_rows() == layout.core_rows() + 11);

  const Zone zone = testing::two_line_zone();
  const auto bounds = testing::simple_bounds(1, 2);
  std::vector<LimitProfile> profiles = {LimitProfile(75.0, 1.5), LimitProfile(50.0, 1.0)};
  const ConstraintSet cs = build_constraints(zone, profiles, bounds, 0, 10, 2.0);
  CHECK(cs.layout.core_rows() == 2 * 2 + 2 * 1 + 2 + 2 * 1);
  CHECK(cs.Hx.rows() == cs.layout.total_rows());
  CHECK(cs.Hx.cols() == zone.dims().n_states());
  CHECK(cs.Hu_curt.rows() == cs.layout.total_rows());
  CHECK(cs.Hu_batt.cols() == 1);
}

TEST_CASE("all-normal profiles keep the rhs constant over the horizon") {
  const Zone zone = testing::two_line_zone();
  const auto bounds = testing::simple_bounds(1, 2);
  std::vector<LimitProfile> profiles = {LimitProfile(75.0, 1.5), LimitProfile(50.0, 1.0)};
  const ConstraintSet cs = build_constraints(zone, profiles, bounds, 3, 12, 2.0);
  const Eigen::VectorXd first = cs.rhs(0);
  for (int t = 1; t <= 12; ++t) CHECK((cs.rhs(t) - first).cwiseAbs().maxCoeff() == 0.0);
  CHECK(first(cs.layout.flow_plus()) == 75.0 - 1.5);
  CHECK(first(cs.layout.energy_lo()) == -0.0);
  CHECK(first(cs.layout.curtail_lo()) == 0.0);
}

TEST_CASE("a stairway crossing inside the horizon drops the rhs at the right step") {
  const Zone zone = testing::two_line_zone();
  const auto bounds = testing::simple_bounds(1, 2);
  std::vector<LimitProfile> profiles = {
      trigger_incident(LimitProfile(75.0, 1.5), 0.0, Stairway({{60.0, 15.0}})),
      LimitProfile(50.0, 1.0)};
  const int k = 20;  // t = 40 s; the stairway expires at t = 60 s, offset 10
  const ConstraintSet cs = build_constraints(zone, profiles, bounds, k, 15, 2.0);
  for (int t = 0; t <= 15; ++t) {
    const double expected = profiles[0].limit_at((k + t) * 2.0);
    CHECK(cs.flow_limit(t, 0) == expected);
    CHECK(cs.rhs(t)(cs.layout.flow_plus()) == expected);
    CHECK(cs.rhs(t)(cs.layout.flow_minus()) == expected);
  }
  CHECK(cs.flow_limit(9, 0) == 90.0);
  CHECK(cs.flow_limit(10, 0) == 75.0);
}

TEST_CASE("infeasible static bounds are rejected") {
  const Zone zone = testing::two_line_zone();
  auto bounds = testing::simple_bounds(1, 2);
  bounds.energy_min(0) = 10.0;
  bounds.energy_max(0) = 5.0;
  std::vector<LimitProfile> profiles = {LimitProfile(75.0, 1.5), LimitProfile(50.0, 1.0)};
  CHECK_THROWS_WITH_AS(build_constraints(zone, profiles, bounds, 0, 10, 2.0),
                       doctest::Contains("energy_min > energy_max"), std::runtime_error);
}

TEST_CASE("one profile per line is required") {
  const Zone zone = testing::two_line_zone();
  const auto bounds = testing::simple_bounds(1, 2);
  std::vector<LimitProfile> profiles = {LimitProfile(75.0, 1.5)};
  CHECK_THROWS_AS(build_constraints(zone, profiles, bounds, 0, 10, 2.0), std::runtime_error);
}
