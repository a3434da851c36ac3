#include "gridmpc/zone.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridmpc {

namespace {

std::map<std::string, int> index_map(const std::vector<std::string>& ids) {
  std::map<std::string, int> m;
  for (int i = 0; i < static_cast<int>(ids.size()); ++i) m.emplace(ids[i], i);
  return m;
}

}  // namespace

int Zone::node_index(const std::string& id) const {
  auto it = std::find(nodes.begin(), nodes.end(), id);
  return it == nodes.end() ? -1 : static_cast<int>(it - nodes.begin());
}

int Zone::line_index(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(lines.size()); ++i)
    if (lines[i].name() == name) return i;
  return -1;
}

std::vector<int> Zone::battery_indices() const {
  std::vector<int> idx;
  idx.reserve(battery_nodes.size());
  for (const auto& id : battery_nodes) idx.push_back(node_index(id));
  return idx;
}

std::vector<int> Zone::curtailable_indices() const {
  std::vector<int> idx;
  idx.reserve(curtailable_nodes.size());
  for (const auto& id : curtailable_nodes) idx.push_back(node_index(id));
  return idx;
}

Eigen::MatrixXd compute_ptdf(const std::vector<std::string>& nodes,
                             const std::vector<Line>& lines,
                             const std::string& slack_node) {
  const int n = static_cast<int>(nodes.size());
  const int nl = static_cast<int>(lines.size());
  if (n == 0) throw std::runtime_error("compute_ptdf: empty node list");

  const auto idx = index_map(nodes);
  if (static_cast<int>(idx.size()) != n)
    throw std::runtime_error("compute_ptdf: duplicate node identifiers");

  auto slack_it = idx.find(slack_node);
  if (slack_it == idx.end())
    throw std::runtime_error("compute_ptdf: slack node '" + slack_node +
                             "' is not in the node list");
  const int slack = slack_it->second;

  std::vector<double> susceptance(nl);
  std::vector<std::pair<int, int>> ends(nl);
  for (int l = 0; l < nl; ++l) {
    const Line& line = lines[l];
    auto fi = idx.find(line.from);
    auto ti = idx.find(line.to);
    if (fi == idx.end() || ti == idx.end())
      throw std::runtime_error("compute_ptdf: line '" + line.name() +
                               "' references an unknown node");
    if (!line.reactance.has_value() || *line.reactance <= 0.0)
      throw std::runtime_error("compute_ptdf: line '" + line.name() +
                               "' needs a positive reactance");
    ends[l] = {fi->second, ti->second};
    susceptance[l] = 1.0 / *line.reactance;
  }

  // Connectivity check (BFS over the undirected line graph).
  {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : ends) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<bool> seen(n, false);
    std::vector<int> stack{slack};
    seen[slack] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
    std::vector<std::string> isolated;
    for (int v = 0; v < n; ++v)
      if (!seen[v]) isolated.push_back(nodes[v]);
    if (!isolated.empty()) {
      std::ostringstream msg;
      msg << "compute_ptdf: network is disconnected; isolated component {";
      for (size_t i = 0; i < isolated.size(); ++i) msg << (i ? ", " : "") << isolated[i];
      msg << "} has no path to the slack bus";
      throw std::runtime_error(msg.str());
    }
  }

  // Nodal susceptance matrix with the slack row/column removed.
  Eigen::MatrixXd b_full = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < nl; ++l) {
    const auto [a, b] = ends[l];
    const double y = susceptance[l];
    b_full(a, a) += y;
    b_full(b, b) += y;
    b_full(a, b) -= y;
    b_full(b, a) -= y;
  }
  const int m = n - 1;
  Eigen::MatrixXd b_red(m, m);
  auto red = [slack](int i) { return i < slack ? i : i - 1; };
  for (int i = 0; i < n; ++i) {
    if (i == slack) continue;
    for (int j = 0; j < n; ++j) {
      if (j == slack) continue;
      b_red(red(i), red(j)) = b_full(i, j);
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu;
  if (m > 0) {
    lu.compute(b_red);
    if (!lu.isInvertible())
      throw std::runtime_error("compute_ptdf: singular reduced susceptance matrix");
  }

  Eigen::MatrixXd ptdf = Eigen::MatrixXd::Zero(nl, n);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  for (int c = 0; c < n; ++c) {
    if (c == slack) continue;  // slack column stays zero
    Eigen::VectorXd injection = Eigen::VectorXd::Zero(m);
    injection(red(c)) = 1.0;
    Eigen::VectorXd theta_red = lu.solve(injection);
    theta.setZero();
    for (int i = 0; i < n; ++i)
      if (i != slack) theta(i) = theta_red(red(i));
    for (int l = 0; l < nl; ++l) {
      const auto [a, b] = ends[l];
      ptdf(l, c) = susceptance[l] * (theta(a) - theta(b));
    }
  }
  return ptdf;
}

Eigen::VectorXd flow_update(const Eigen::VectorXd& f0, const Eigen::MatrixXd& ptdf,
                            const Eigen::VectorXd& delta_injection) {
  if (ptdf.rows() != f0.size())
    throw std::invalid_argument("flow_update: F0 length " + std::to_string(f0.size()) +
                                " does not match PTDF rows " + std::to_string(ptdf.rows()));
  if (ptdf.cols() != delta_injection.size())
    throw std::invalid_argument("flow_update: injection length " +
                                std::to_string(delta_injection.size()) +
                                " does not match PTDF columns " + std::to_string(ptdf.cols()));
  return f0 + ptdf * delta_injection;
}

std::vector<std::string> validate_zone(const Zone& zone) {
  std::vector<std::string> violations;
  auto add = [&violations](const std::string& v) { violations.push_back(v); };

  {
    std::set<std::string> seen;
    for (const auto& id : zone.nodes)
      if (!seen.insert(id).second) add("nodes: duplicate identifier '" + id + "'");
  }
  auto check_subset = [&](const std::vector<std::string>& subset, const char* field) {
    std::set<std::string> seen;
    for (const auto& id : subset) {
      if (zone.node_index(id) < 0)
        add(std::string(field) + ": '" + id + "' is not a zone node");
      if (!seen.insert(id).second)
        add(std::string(field) + ": duplicate identifier '" + id + "'");
    }
  };
  check_subset(zone.battery_nodes, "battery_nodes");
  check_subset(zone.curtailable_nodes, "curtailable_nodes");

  for (const auto& line : zone.lines) {
    if (line.from == line.to)
      add("lines: '" + line.name() + "' connects a node to itself");
    if (zone.node_index(line.from) < 0)
      add("lines: '" + line.name() + "' endpoint '" + line.from + "' is not a zone node");
    if (zone.node_index(line.to) < 0)
      add("lines: '" + line.name() + "' endpoint '" + line.to + "' is not a zone node");
    if (line.thermal_limit <= 0.0)
      add("lines: '" + line.name() + "' thermal_limit must be > 0 MW");
    if (line.reactance.has_value() && *line.reactance <= 0.0)
      add("lines: '" + line.name() + "' reactance must be > 0 when present");
    if (line.margin < 0.0) add("lines: '" + line.name() + "' margin must be >= 0 MW");
    if (line.margin >= line.thermal_limit && line.thermal_limit > 0.0)
      add("lines: '" + line.name() + "' margin leaves no positive flow bound");
  }

  const auto dims = zone.dims();
  if (zone.ptdf.rows() != dims.n_lines || zone.ptdf.cols() != dims.n_nodes) {
    add("ptdf: expected " + std::to_string(dims.n_lines) + "x" + std::to_string(dims.n_nodes) +
        ", got " + std::to_string(zone.ptdf.rows()) + "x" + std::to_string(zone.ptdf.cols()));
    return violations;  // entry checks below would index out of range
  }

  for (int l = 0; l < dims.n_lines; ++l)
    for (int c = 0; c < dims.n_nodes; ++c) {
      const double v = zone.ptdf(l, c);
      if (!std::isfinite(v) || std::abs(v) > 1.0 + 1e-9) {
        std::ostringstream msg;
        msg << "ptdf: entry for line '" << zone.lines[l].name() << "' node '" << zone.nodes[c]
            << "' = " << v << " outside [-1, 1]";
        add(msg.str());
      }
    }

  const int slack = zone.node_index(zone.slack_node);
  if (slack >= 0) {
    for (int l = 0; l < dims.n_lines; ++l)
      if (std::abs(zone.ptdf(l, slack)) > 1e-9) {
        std::ostringstream msg;
        msg << "ptdf: slack column for node '" << zone.slack_node << "' must be zero (found "
            << zone.ptdf(l, slack) << " at line '" << zone.lines[l].name() << "')";
        add(msg.str());
        break;
      }
  }
  return violations;
}

}  // namespace gridmpc
