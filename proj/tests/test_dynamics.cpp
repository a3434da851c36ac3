#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gridmpc/dynamics.hpp"
#include "oracles.hpp"
#include "test_common.hpp"

using namespace gridmpc;

namespace {

DelayConfig paper_delays() { return DelayConfig{2.0, 45.0, 1.0}; }

SystemState random_state(const ZoneDims& dims, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-20.0, 20.0);
  SystemState s = SystemState::zero(dims);
  for (int l = 0; l < dims.n_lines; ++l) s.flows(l) = coef(rng);
  for (int b = 0; b < dims.n_batteries; ++b) {
    s.battery_energy(b) = std::abs(coef(rng));
    s.battery_power(b) = coef(rng);
  }
  for (int c = 0; c < dims.n_curtailable; ++c) s.curtailment(c) = std::abs(coef(rng));
  return s;
}

}  // namespace

TEST_CASE("delay arithmetic") {
  const DelayConfig delays = paper_delays();
  CHECK(delays.d_curt() == 22);
  CHECK(delays.d_batt() == 0);
  CHECK(DelayConfig{2.0, 44.0, 2.0}.d_curt() == 21);
  CHECK(DelayConfig{2.0, 0.0, 0.0}.d_curt() == 0);
  CHECK(DelayConfig{2.0, 1.0, 45.0}.check().size() == 1);  // batt slower than curt
}

TEST_CASE("savignac-sized zone yields a 35-dimensional state") {
  // 21 nodes, 22 lines, 1 battery, 11 curtailable.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-0.9, 0.9);
  Zone zone;
  for (int i = 0; i < 21; ++i) zone.nodes.push_back("n" + std::to_string(i));
  for (int i = 0; i < 22; ++i) {
    Line l;
    l.from = zone.nodes[i % 21];
    l.to = zone.nodes[(i * 7 + 1) % 21];
    if (l.from == l.to) l.to = zone.nodes[(i * 7 + 2) % 21];
    l.thermal_limit = 100.0;
    zone.lines.push_back(l);
  }
  zone.slack_node = zone.nodes[20];
  zone.ptdf.resize(22, 21);
  for (int r = 0; r < 22; ++r)
    for (int c = 0; c < 21; ++c) zone.ptdf(r, c) = c == 20 ? 0.0 : coef(rng);
  zone.battery_nodes = {zone.nodes[0]};
  for (int i = 0; i < 11; ++i) zone.curtailable_nodes.push_back(zone.nodes[i]);

  CHECK(zone.dims().n_states() == 35);
  const StateSpaceModel model = build_model(zone, paper_delays());
  CHECK(model.A.rows() == 35);
  CHECK(model.B_curt.cols() == 11);
  CHECK(model.B_batt.cols() == 1);
  CHECK(model.B_w.cols() == 21);
}

TEST_CASE("a zone without batteries degenerates to the identity") {
  Zone zone = testing::one_line_zone();
  zone.battery_nodes.clear();
  const StateSpaceModel model = build_model(zone, paper_delays());
  CHECK(model.B_batt.cols() == 0);
  CHECK(model.A.isIdentity(0.0));
}

TEST_CASE("input blocks carry the ptdf columns with the withdrawal sign") {
  const Zone zone = testing::triangle_zone();
  Zone z = zone;
  z.battery_nodes = {"bus2"};
  z.curtailable_nodes = {"bus1"};
  const StateSpaceModel model = build_model(z, paper_delays());
  const auto dims = z.dims();
  // Curtailing or charging withdraws injection, so the flow blocks are the
  // negated ptdf columns; the disturbance block is the ptdf itself.
  CHECK((model.B_curt.topRows(dims.n_lines) + zone.ptdf.col(0)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((model.B_batt.topRows(dims.n_lines) + zone.ptdf.col(1)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((model.B_w.topRows(dims.n_lines) - zone.ptdf).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.B_w.bottomRows(dims.n_states() - dims.n_lines).cwiseAbs().maxCoeff() == 0.0);
  // Charging also integrates into the energy row.
  CHECK(model.B_batt(dims.energy_offset(), 0) == doctest::Approx(2.0 / 3600.0));
  CHECK(model.B_curt(dims.curtail_offset(), 0) == 1.0);
}

TEST_CASE("step keeps an idle plant unchanged") {
  const Zone zone = testing::one_line_zone();
  const StateSpaceModel model = build_model(zone, paper_delays());
  SystemState s = SystemState::zero(zone.dims());
  s.flows(0) = 98.0;
  s.battery_energy(0) = 5.0;
  const SystemState next = step(model, s, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1),
                                Eigen::VectorXd::Zero(3));
  CHECK(next.flows(0) == 98.0);
  CHECK(next.battery_energy(0) == 5.0);
  CHECK(next.battery_power(0) == 0.0);
  CHECK(next.curtailment(0) == 0.0);
}

TEST_CASE("a +30 MW battery order charges at 30 MW and banks dt/3600 energy") {
  const Zone zone = testing::one_line_zone();
  const StateSpaceModel model = build_model(zone, paper_delays());
  SystemState s = SystemState::zero(zone.dims());
  s.battery_energy(0) = 5.0;
  Eigen::VectorXd order(1);
  order << 30.0;
  const SystemState next =
      step(model, s, Eigen::VectorXd::Zero(1), order, Eigen::VectorXd::Zero(3));
  CHECK(next.battery_power(0) == 30.0);
  CHECK(next.battery_energy(0) == doctest::Approx(5.0 + 2.0 / 3600.0 * 30.0).epsilon(1e-14));
}

TEST_CASE("fifty random steps track cumulative superposition") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  const Zone zone = testing::triangle_zone();
  Zone z = zone;
  z.battery_nodes = {"bus2"};
  z.curtailable_nodes = {"bus1"};
  const auto dims = z.dims();
  const StateSpaceModel model = build_model(z, paper_delays());

  SystemState s = SystemState::zero(dims);
  s.flows << 10.0, 20.0, 30.0;
  const Eigen::VectorXd f0 = s.flows;
  Eigen::VectorXd injections = Eigen::VectorXd::Zero(dims.n_nodes);

  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd u(1), v(1), w(3);
    u << coef(rng);
    v << coef(rng);
    w << coef(rng), coef(rng), 0.0;
    s = step(model, s, u, v, w);
    injections += w;
    injections(0) -= u(0);  // curtailment withdraws at bus1
    injections(1) -= v(0);  // charging withdraws at bus2
    const Eigen::VectorXd expected = flow_update(f0, z.ptdf, injections);
    CHECK((s.flows - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("step is affine: superposition of deviations") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> coef(-4.0, 4.0);
  const Zone zone = testing::two_line_zone();
  const auto dims = zone.dims();
  const StateSpaceModel model = build_model(zone, paper_delays());

  for (int trial = 0; trial < 20; ++trial) {
    const SystemState xa = random_state(dims, rng);
    const SystemState xb = random_state(dims, rng);
    Eigen::VectorXd ua(2), ub(2), va(1), vb(1), wa(4), wb(4);
    for (int i = 0; i < 2; ++i) {
      ua(i) = coef(rng);
      ub(i) = coef(rng);
    }
    va << coef(rng);
    vb << coef(rng);
    for (int i = 0; i < 4; ++i) {
      wa(i) = coef(rng);
      wb(i) = coef(rng);
    }
    const Eigen::VectorXd fa = step(model, xa, ua, va, wa).to_vector();
    const Eigen::VectorXd fb = step(model, xb, ub, vb, wb).to_vector();
    const SystemState xsum = SystemState::from_vector(xa.to_vector() + xb.to_vector(), dims);
    const Eigen::VectorXd fsum = step(model, xsum, ua + ub, va + vb, wa + wb).to_vector();
    // affine with zero offset at the origin -> additive in all arguments
    CHECK((fsum - fa - fb).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("order buffer delays by exactly d steps") {
  OrderBuffer buffer(22, 0, 1, 1);
  Eigen::VectorXd impulse(1), zero(1), bimp(1);
  impulse << 7.0;
  zero << 0.0;
  bimp << 3.0;

  // battery orders (d = 0) pass through the same step
  auto first = buffer.push(impulse, bimp);
  CHECK(first.batt(0) == 3.0);
  CHECK(first.curt(0) == 0.0);

  // the curtailment impulse sent at step 0 must pop at step 22
  for (int k = 1; k < 22; ++k) {
    const auto eff = buffer.push(zero, zero);
    CHECK(eff.curt(0) == 0.0);
  }
  const auto eff = buffer.push(zero, zero);
  CHECK(eff.curt(0) == 7.0);
}

TEST_CASE("a fresh buffer releases zeros") {
  OrderBuffer buffer(3, 2, 2, 1);
  CHECK(buffer.pending_curt().size() == 3);
  CHECK(buffer.pending_batt().size() == 2);
  Eigen::VectorXd u(2), v(1);
  u << 1.0, 2.0;
  v << 5.0;
  const auto eff = buffer.push(u, v);
  CHECK(eff.curt.cwiseAbs().maxCoeff() == 0.0);
  CHECK(eff.batt.cwiseAbs().maxCoeff() == 0.0);
  CHECK(buffer.pending_curt().back()(1) == 2.0);
}

TEST_CASE("an impulse order first changes flows at step k + d + 1") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> delay(1, 6);
  std::uniform_int_distribution<int> when(0, 4);
  const Zone zone = testing::one_line_zone();
  const auto dims = zone.dims();

  for (int trial = 0; trial < 10; ++trial) {
    const int d = delay(rng);
    const int k_impulse = when(rng);
    DelayConfig delays{2.0, 2.0 * (d + 1), 1.0};
    REQUIRE(delays.d_curt() == d);
    const StateSpaceModel model = build_model(zone, delays);
    OrderBuffer buffer(d, 0, 1, 1);

    SystemState s = SystemState::zero(dims);
    s.flows(0) = 50.0;
    Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    for (int k = 0; k < k_impulse + d + 5; ++k) {
      Eigen::VectorXd u = zero1;
      if (k == k_impulse) u(0) = 10.0;
      const auto eff = buffer.push(u, zero1);
      s = step(model, s, eff.curt, eff.batt, w);
      // s is now the state at step k+1
      if (k + 1 <= k_impulse + d)
        CHECK(s.flows(0) == 50.0);
      else
        CHECK(s.flows(0) == doctest::Approx(50.0 - 0.36 * 10.0));
    }
  }
}
