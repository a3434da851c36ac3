#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gridmpc/zone.hpp"
#include "oracles.hpp"
#include "test_common.hpp"

using namespace gridmpc;
using gridmpc::testing::dc_flow_oracle;
using gridmpc::testing::random_connected_network;

namespace {

Line make_line(const char* from, const char* to, double reactance) {
  Line l;
  l.from = from;
  l.to = to;
  l.reactance = reactance;
  l.thermal_limit = 100.0;
  return l;
}

}  // namespace

TEST_CASE("triangle ptdf matches the hand-solved reduced system") {
  const Zone zone = testing::triangle_zone();
  const int bus1 = 0;
  CHECK(zone.ptdf(zone.line_index("bus1-bus3"), bus1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(zone.ptdf(zone.line_index("bus1-bus2"), bus1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(zone.ptdf(zone.line_index("bus2-bus3"), bus1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("slack column is identically zero") {
  const Zone zone = testing::triangle_zone();
  CHECK(zone.ptdf.col(2).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = random_connected_network(rng);
    const auto ptdf = compute_ptdf(net.nodes, net.lines, net.nodes[net.slack_index]);
    CHECK(ptdf.col(net.slack_index).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("eight-node benchmark tuned to 0.8 on the marked line") {
  // Two parallel paths between n1 and the slack n2: a direct line with
  // reactance 1 and a detour of total reactance 4, so the direct line carries
  // 1 / (1 + 1/4) = 0.8 of the transfer. The other five nodes hang off as
  // radial spurs and carry nothing.
  std::vector<std::string> nodes = {"n1", "n2", "n3", "n4", "n5", "n6", "n7", "n8"};
  std::vector<Line> lines = {
      make_line("n1", "n2", 1.0),  // marked line
      make_line("n1", "n3", 2.0), make_line("n3", "n2", 2.0), make_line("n4", "n2", 1.0),
      make_line("n5", "n4", 1.0), make_line("n6", "n3", 1.0), make_line("n7", "n6", 1.0),
      make_line("n8", "n7", 1.0)};
  const auto ptdf = compute_ptdf(nodes, lines, "n2");
  CHECK(ptdf(0, 0) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("disconnected network is rejected naming the isolated component") {
  std::vector<std::string> nodes = {"a", "b", "c", "d"};
  std::vector<Line> lines = {make_line("a", "b", 1.0), make_line("c", "d", 1.0)};
  CHECK_THROWS_WITH_AS(compute_ptdf(nodes, lines, "a"),
                       doctest::Contains("isolated component {c, d}"), std::runtime_error);
}

TEST_CASE("missing reactance is rejected") {
  std::vector<std::string> nodes = {"a", "b"};
  Line l = make_line("a", "b", 1.0);
  l.reactance.reset();
  CHECK_THROWS_AS(compute_ptdf(nodes, {l}, "a"), std::runtime_error);
}

TEST_CASE("flow_update basics") {
  Eigen::MatrixXd ptdf(1, 2);
  ptdf << 0.36, 0.0;
  Eigen::VectorXd f0(1);
  f0 << 50.0;

  SUBCASE("no operation changes nothing") {
    CHECK(flow_update(f0, ptdf, Eigen::Vector2d(0.0, 0.0))(0) == 50.0);
  }
  SUBCASE("a -10 MW injection at a 0.36 node moves the flow by -3.6 MW") {
    const auto f = flow_update(f0, ptdf, Eigen::Vector2d(-10.0, 0.0));
    CHECK(f(0) == doctest::Approx(50.0 - 3.6).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(flow_update(f0, ptdf, Eigen::Vector3d::Zero()), std::invalid_argument);
  }
}

TEST_CASE("flow_update superposition") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> coef(-5.0, 5.0);
  const auto net = random_connected_network(rng, 6);
  const auto ptdf = compute_ptdf(net.nodes, net.lines, net.nodes[net.slack_index]);
  const int n = static_cast<int>(net.nodes.size());
  Eigen::VectorXd f0(net.lines.size());
  for (Eigen::Index i = 0; i < f0.size(); ++i) f0(i) = coef(rng);

  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a(i) = coef(rng);
      b(i) = coef(rng);
    }
    const Eigen::VectorXd joint = flow_update(f0, ptdf, a + b);
    const Eigen::VectorXd sequential = flow_update(flow_update(f0, ptdf, a), ptdf, b);
    CHECK((joint - sequential).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("flow_update agrees with a fresh dc power-flow solve") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> coef(-10.0, 10.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = random_connected_network(rng, 5);
    const int n = static_cast<int>(net.nodes.size());
    const auto ptdf = compute_ptdf(net.nodes, net.lines, net.nodes[net.slack_index]);

    // Base injections and a delta, both balanced at the slack.
    Eigen::VectorXd base = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (i == net.slack_index) continue;
      base(i) = coef(rng);
      delta(i) = coef(rng);
    }
    base(net.slack_index) = -base.sum();
    delta(net.slack_index) -= delta.sum();

    const Eigen::VectorXd f0 = dc_flow_oracle(net.nodes, net.lines, base);
    const Eigen::VectorXd expected = dc_flow_oracle(net.nodes, net.lines, base + delta);
    const Eigen::VectorXd got = flow_update(f0, ptdf, delta);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("ptdf columns match the finite-difference dc oracle") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = random_connected_network(rng);
    const int n = static_cast<int>(net.nodes.size());
    const auto ptdf = compute_ptdf(net.nodes, net.lines, net.nodes[net.slack_index]);
    for (int c = 0; c < n; ++c) {
      Eigen::VectorXd injection = Eigen::VectorXd::Zero(n);
      injection(c) += 1.0;
      injection(net.slack_index) -= 1.0;
      const Eigen::VectorXd flows = dc_flow_oracle(net.nodes, net.lines, injection);
      CHECK((ptdf.col(c) - flows).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("validate_zone") {
  SUBCASE("well-formed zone has no violations") {
    CHECK(validate_zone(testing::triangle_zone()).empty());
  }
  SUBCASE("battery node outside the zone is reported by name") {
    Zone zone = testing::triangle_zone();
    zone.battery_nodes = {"nowhere"};
    const auto violations = validate_zone(zone);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("nowhere") != std::string::npos);
  }
  SUBCASE("ptdf entry outside [-1, 1] names line, node and value") {
    Zone zone = testing::triangle_zone();
    zone.ptdf(0, 0) = 1.5;
    const auto violations = validate_zone(zone);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("bus1-bus2") != std::string::npos);
    CHECK(violations[0].find("bus1") != std::string::npos);
    CHECK(violations[0].find("1.5") != std::string::npos);
  }
  SUBCASE("nonzero slack column is a violation") {
    Zone zone = testing::triangle_zone();
    zone.ptdf(0, 2) = 0.1;
    CHECK(validate_zone(zone).size() == 1);
  }
  SUBCASE("dimension mismatch is a violation") {
    Zone zone = testing::triangle_zone();
    zone.ptdf = Eigen::MatrixXd::Zero(2, 3);
    CHECK(validate_zone(zone).size() == 1);
  }
}
