#include "gridmpc/scenario_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace gridmpc {

using nlohmann::json;

namespace {

constexpr double kDefaultMarginFraction = 0.02;  // of the thermal limit

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ScenarioError(path + ": " + what);
}

// Strict object access: every key must be consumed, leftovers are errors.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  const json& require(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) fail(path_, std::string("missing required key '") + key + "'");
    consumed_.insert(key);
    return *it;
  }

  const json* optional(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    consumed_.insert(key);
    return &*it;
  }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!consumed_.contains(it.key()))
        fail(path_ + "." + it.key(), "unknown key (strict mode)");
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> consumed_;
};

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  return j;
}

std::string elem(const std::string& path, size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path, int rows, int cols,
                             const char* row_what) {
  as_array(j, path);
  if (static_cast<int>(j.size()) != rows)
    fail(path, "expected " + std::to_string(rows) + " " + row_what + " rows, got " +
                   std::to_string(j.size()));
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = as_array(j[r], elem(path, r));
    if (static_cast<int>(row.size()) != cols)
      fail(elem(path, r), "expected " + std::to_string(cols) + " entries, got " +
                              std::to_string(row.size()));
    for (int c = 0; c < cols; ++c) m(r, c) = as_number(row[c], elem(elem(path, r), c));
  }
  return m;
}

struct NetworkBlock {
  Zone zone;                   // without device lists
  bool ptdf_supplied = false;
  bool any_reactance = false;
};

NetworkBlock parse_network_block(const json& j, const std::string& path,
                                 const std::string& slack_override,
                                 std::vector<std::string>* warnings) {
  ObjectReader net(j, path);
  NetworkBlock out;
  Zone& zone = out.zone;

  {
    const auto& nodes = as_array(net.require("nodes"), path + ".nodes");
    for (size_t i = 0; i < nodes.size(); ++i)
      zone.nodes.push_back(as_string(nodes[i], elem(path + ".nodes", i)));
  }
  {
    const auto& lines = as_array(net.require("lines"), path + ".lines");
    for (size_t i = 0; i < lines.size(); ++i) {
      const std::string lpath = elem(path + ".lines", i);
      ObjectReader lr(lines[i], lpath);
      Line line;
      line.from = as_string(lr.require("from"), lpath + ".from");
      line.to = as_string(lr.require("to"), lpath + ".to");
      line.thermal_limit = as_number(lr.require("thermal_limit"), lpath + ".thermal_limit");
      if (const json* x = lr.optional("reactance")) {
        line.reactance = as_number(*x, lpath + ".reactance");
        out.any_reactance = true;
      }
      if (const json* m = lr.optional("margin"))
        line.margin = as_number(*m, lpath + ".margin");
      else
        line.margin = kDefaultMarginFraction * line.thermal_limit;
      lr.finish();
      zone.lines.push_back(std::move(line));
    }
  }
  zone.slack_node = as_string(net.require("slack"), path + ".slack");
  if (!slack_override.empty()) zone.slack_node = slack_override;

  const json* ptdf = net.optional("ptdf");
  net.finish();

  if (ptdf != nullptr) {
    zone.ptdf = parse_matrix(*ptdf, path + ".ptdf", static_cast<int>(zone.lines.size()),
                             static_cast<int>(zone.nodes.size()), "line");
    out.ptdf_supplied = true;
    if (out.any_reactance && warnings != nullptr)
      warnings->push_back(path + ": both reactances and an explicit ptdf table are present; "
                          "the supplied ptdf wins");
  } else {
    try {
      zone.ptdf = compute_ptdf(zone.nodes, zone.lines, zone.slack_node);
    } catch (const std::exception& e) {
      fail(path, std::string(e.what()) +
                     " (alternatively, supply an explicit ptdf block)");
    }
  }
  return out;
}

int resolve_node(const Zone& zone, const std::string& id, const std::string& path) {
  const int idx = zone.node_index(id);
  if (idx < 0) fail(path, "unknown node '" + id + "'");
  return idx;
}

int resolve_line(const Zone& zone, const json& j, const std::string& path) {
  if (j.is_number_integer()) {
    const int idx = j.get<int>();
    if (idx < 0 || idx >= static_cast<int>(zone.lines.size()))
      fail(path, "line index " + std::to_string(idx) + " out of range");
    return idx;
  }
  const std::string name = as_string(j, path);
  const int idx = zone.line_index(name);
  if (idx < 0) fail(path, "unknown line '" + name + "' (use \"from-to\" or an index)");
  return idx;
}

Stairway parse_stairway(const json& j, const std::string& path) {
  const auto& arr = as_array(j, path);
  std::vector<StairStep> steps;
  for (size_t i = 0; i < arr.size(); ++i) {
    const auto& pair = as_array(arr[i], elem(path, i));
    if (pair.size() != 2) fail(elem(path, i), "expected [duration_s, overload_mw]");
    steps.push_back(StairStep{as_number(pair[0], elem(path, i) + "[0]"),
                              as_number(pair[1], elem(path, i) + "[1]")});
  }
  try {
    return Stairway(std::move(steps));
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

}  // namespace

ParsedScenario parse_scenario(const json& j) {
  ParsedScenario out;
  Scenario& sc = out.scenario;
  ObjectReader root(j, "$");

  const NetworkBlock net = parse_network_block(root.require("network"), "network", "",
                                               &out.warnings);
  sc.zone = net.zone;
  sc.ptdf_supplied = net.ptdf_supplied;

  {
    const std::string path = "devices";
    ObjectReader devices(root.require("devices"), path);
    std::vector<double> e_min, e_max, p_min, p_max, e0, c_max;
    const auto& batteries = as_array(devices.require("batteries"), path + ".batteries");
    for (size_t i = 0; i < batteries.size(); ++i) {
      const std::string bpath = elem(path + ".batteries", i);
      ObjectReader br(batteries[i], bpath);
      const std::string node = as_string(br.require("node"), bpath + ".node");
      resolve_node(sc.zone, node, bpath + ".node");
      sc.zone.battery_nodes.push_back(node);
      e_min.push_back(as_number(br.require("e_min"), bpath + ".e_min"));
      e_max.push_back(as_number(br.require("e_max"), bpath + ".e_max"));
      p_min.push_back(as_number(br.require("p_min"), bpath + ".p_min"));
      p_max.push_back(as_number(br.require("p_max"), bpath + ".p_max"));
      e0.push_back(as_number(br.require("e0"), bpath + ".e0"));
      br.finish();
    }
    const auto& curtailable = as_array(devices.require("curtailable"), path + ".curtailable");
    for (size_t i = 0; i < curtailable.size(); ++i) {
      const std::string cpath = elem(path + ".curtailable", i);
      ObjectReader cr(curtailable[i], cpath);
      const std::string node = as_string(cr.require("node"), cpath + ".node");
      resolve_node(sc.zone, node, cpath + ".node");
      sc.zone.curtailable_nodes.push_back(node);
      c_max.push_back(as_number(cr.require("p_max"), cpath + ".p_max"));
      cr.finish();
    }
    devices.finish();
    auto to_vec = [](const std::vector<double>& v) {
      return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))
          .eval();
    };
    sc.bounds.energy_min = to_vec(e_min);
    sc.bounds.energy_max = to_vec(e_max);
    sc.bounds.power_min = to_vec(p_min);
    sc.bounds.power_max = to_vec(p_max);
    sc.bounds.curtail_max = to_vec(c_max);
    sc.initial_energy = to_vec(e0);
  }

  {
    const std::string path = "controller";
    ObjectReader ctrl(root.require("controller"), path);
    sc.controller.delays.dt_s = as_number(ctrl.require("dt_s"), path + ".dt_s");
    sc.controller.delays.tau_curt_s = as_number(ctrl.require("tau_curt_s"), path + ".tau_curt_s");
    sc.controller.delays.tau_batt_s = as_number(ctrl.require("tau_batt_s"), path + ".tau_batt_s");
    sc.controller.horizon = as_int(ctrl.require("horizon"), path + ".horizon");
    {
      const std::string wpath = path + ".weights";
      ObjectReader weights(ctrl.require("weights"), wpath);
      sc.controller.weight_batt = as_number(weights.require("battery"), wpath + ".battery");
      sc.controller.weight_curt = as_number(weights.require("curtailment"),
                                            wpath + ".curtailment");
      sc.controller.weight_energy = as_number(weights.require("energy_ref"),
                                              wpath + ".energy_ref");
      sc.controller.slack_weight = as_number(weights.require("slack"), wpath + ".slack");
      weights.finish();
    }
    if (const json* e_ref = ctrl.optional("e_ref"))
      sc.controller.energy_ref_mwh = as_number(*e_ref, path + ".e_ref");
    ctrl.finish();
  }

  {
    const std::string path = "timeline";
    ObjectReader timeline(root.require("timeline"), path);
    sc.duration_steps = as_int(timeline.require("duration_steps"), path + ".duration_steps");

    {
      const std::string dpath = path + ".disturbances";
      ObjectReader dist(timeline.require("disturbances"), dpath);
      const json* table = dist.optional("table");
      const json* walk = dist.optional("random_walk");
      dist.finish();
      if ((table != nullptr) == (walk != nullptr))
        fail(dpath, "provide exactly one of 'table' or 'random_walk'");
      if (table != nullptr) {
        const auto& rows = as_array(*table, dpath + ".table");
        if (static_cast<int>(rows.size()) < sc.duration_steps)
          fail(dpath + ".table", "needs at least duration_steps (" +
                                     std::to_string(sc.duration_steps) + ") rows, got " +
                                     std::to_string(rows.size()));
        sc.disturbances = parse_matrix(*table, dpath + ".table", static_cast<int>(rows.size()),
                                       static_cast<int>(sc.zone.nodes.size()), "per-step");
      } else {
        const std::string wpath = dpath + ".random_walk";
        ObjectReader wr(*walk, wpath);
        RandomWalkSpec spec;
        const json& seed = wr.require("seed");
        if (!seed.is_number_integer() || seed.get<long long>() < 0)
          fail(wpath + ".seed", "expected a nonnegative integer");
        spec.seed = seed.get<std::uint64_t>();
        spec.sigma_mw = as_number(wr.require("sigma"), wpath + ".sigma");
        if (const json* nodes = wr.optional("nodes")) {
          const auto& arr = as_array(*nodes, wpath + ".nodes");
          for (size_t i = 0; i < arr.size(); ++i)
            spec.nodes.push_back(resolve_node(
                sc.zone, as_string(arr[i], elem(wpath + ".nodes", i)), elem(wpath + ".nodes", i)));
        }
        wr.finish();
        sc.disturbances = std::move(spec);
      }
    }

    {
      const auto& events = as_array(timeline.require("events"), path + ".events");
      for (size_t i = 0; i < events.size(); ++i) {
        const std::string epath = elem(path + ".events", i);
        ObjectReader er(events[i], epath);
        IncidentEvent ev;
        ev.t_s = as_number(er.require("t_s"), epath + ".t_s");
        ev.line = resolve_line(sc.zone, er.require("line"), epath + ".line");
        ev.stairway = parse_stairway(er.require("stairway"), epath + ".stairway");
        er.finish();
        sc.events.push_back(std::move(ev));
      }
    }
    timeline.finish();
  }

  {
    const auto& flows = as_array(root.require("initial_flows"), "initial_flows");
    if (flows.size() != sc.zone.lines.size())
      fail("initial_flows", "expected one entry per line (" +
                                std::to_string(sc.zone.lines.size()) + "), got " +
                                std::to_string(flows.size()));
    sc.initial_flows.resize(static_cast<Eigen::Index>(flows.size()));
    for (size_t i = 0; i < flows.size(); ++i)
      sc.initial_flows(static_cast<Eigen::Index>(i)) =
          as_number(flows[i], elem("initial_flows", i));
  }

  root.finish();

  {
    const auto issues = sc.validate();
    if (!issues.empty()) {
      std::ostringstream msg;
      msg << "scenario is invalid:";
      for (const auto& v : issues) msg << "\n  - " << v;
      throw ScenarioError(msg.str());
    }
  }
  return out;
}

ParsedScenario parse_scenario_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("json parse error: ") + e.what());
  }
  return parse_scenario(j);
}

ParsedScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str());
}

Zone parse_network(const json& j, const std::string& slack_override,
                   std::vector<std::string>* warnings) {
  if (!j.is_object() || !j.contains("network"))
    throw ScenarioError("$: missing required key 'network'");
  return parse_network_block(j.at("network"), "network", slack_override, warnings).zone;
}

json serialize_scenario(const Scenario& sc) {
  json j;
  json network;
  network["nodes"] = sc.zone.nodes;
  json lines = json::array();
  for (const auto& line : sc.zone.lines) {
    json lj;
    lj["from"] = line.from;
    lj["to"] = line.to;
    if (line.reactance.has_value()) lj["reactance"] = *line.reactance;
    lj["thermal_limit"] = line.thermal_limit;
    lj["margin"] = line.margin;
    lines.push_back(std::move(lj));
  }
  network["lines"] = std::move(lines);
  network["slack"] = sc.zone.slack_node;
  if (sc.ptdf_supplied) {
    json ptdf = json::array();
    for (Eigen::Index r = 0; r < sc.zone.ptdf.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < sc.zone.ptdf.cols(); ++c) row.push_back(sc.zone.ptdf(r, c));
      ptdf.push_back(std::move(row));
    }
    network["ptdf"] = std::move(ptdf);
  }
  j["network"] = std::move(network);

  json devices;
  json batteries = json::array();
  for (size_t b = 0; b < sc.zone.battery_nodes.size(); ++b) {
    json bj;
    bj["node"] = sc.zone.battery_nodes[b];
    bj["e_min"] = sc.bounds.energy_min(static_cast<Eigen::Index>(b));
    bj["e_max"] = sc.bounds.energy_max(static_cast<Eigen::Index>(b));
    bj["p_min"] = sc.bounds.power_min(static_cast<Eigen::Index>(b));
    bj["p_max"] = sc.bounds.power_max(static_cast<Eigen::Index>(b));
    bj["e0"] = sc.initial_energy(static_cast<Eigen::Index>(b));
    batteries.push_back(std::move(bj));
  }
  devices["batteries"] = std::move(batteries);
  json curtailable = json::array();
  for (size_t c = 0; c < sc.zone.curtailable_nodes.size(); ++c) {
    json cj;
    cj["node"] = sc.zone.curtailable_nodes[c];
    cj["p_max"] = sc.bounds.curtail_max(static_cast<Eigen::Index>(c));
    curtailable.push_back(std::move(cj));
  }
  devices["curtailable"] = std::move(curtailable);
  j["devices"] = std::move(devices);

  json controller;
  controller["dt_s"] = sc.controller.delays.dt_s;
  controller["tau_curt_s"] = sc.controller.delays.tau_curt_s;
  controller["tau_batt_s"] = sc.controller.delays.tau_batt_s;
  controller["horizon"] = sc.controller.horizon;
  controller["weights"] = {{"battery", sc.controller.weight_batt},
                           {"curtailment", sc.controller.weight_curt},
                           {"energy_ref", sc.controller.weight_energy},
                           {"slack", sc.controller.slack_weight}};
  controller["e_ref"] = sc.controller.energy_ref_mwh;
  j["controller"] = std::move(controller);

  json timeline;
  timeline["duration_steps"] = sc.duration_steps;
  if (const auto* table = std::get_if<Eigen::MatrixXd>(&sc.disturbances)) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < table->rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < table->cols(); ++c) row.push_back((*table)(r, c));
      rows.push_back(std::move(row));
    }
    timeline["disturbances"] = {{"table", std::move(rows)}};
  } else {
    const auto& spec = std::get<RandomWalkSpec>(sc.disturbances);
    json walk;
    walk["seed"] = spec.seed;
    walk["sigma"] = spec.sigma_mw;
    if (!spec.nodes.empty()) {
      json nodes = json::array();
      for (int idx : spec.nodes) nodes.push_back(sc.zone.nodes[idx]);
      walk["nodes"] = std::move(nodes);
    }
    timeline["disturbances"] = {{"random_walk", std::move(walk)}};
  }
  json events = json::array();
  for (const auto& ev : sc.events) {
    json ej;
    ej["t_s"] = ev.t_s;
    ej["line"] = sc.zone.lines[ev.line].name();
    json stairway = json::array();
    for (const auto& step : ev.stairway.steps())
      stairway.push_back(json::array({step.duration_s, step.overload_mw}));
    ej["stairway"] = std::move(stairway);
    events.push_back(std::move(ej));
  }
  timeline["events"] = std::move(events);
  j["timeline"] = std::move(timeline);

  json flows = json::array();
  for (Eigen::Index l = 0; l < sc.initial_flows.size(); ++l)
    flows.push_back(sc.initial_flows(l));
  j["initial_flows"] = std::move(flows);

  return j;
}

}  // namespace gridmpc
