#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace gridmpc {

// An oriented transmission line. The (from, to) orientation is fixed and
// defines the flow sign convention.
struct Line {
  std::string from;
  std::string to;
  std::optional<double> reactance;  // per unit
  double thermal_limit = 0.0;       // MW
  double margin = 0.0;              // MW, security margin in normal situation

  std::string name() const { return from + "-" + to; }
};

// Dimensions of the controlled zone. The aggregated state vector is laid out
// as [flows; battery energies; curtailments; battery powers].
struct ZoneDims {
  int n_lines = 0;
  int n_batteries = 0;
  int n_curtailable = 0;
  int n_nodes = 0;

  int n_states() const { return n_lines + 2 * n_batteries + n_curtailable; }
  int flow_offset() const { return 0; }
  int energy_offset() const { return n_lines; }
  int curtail_offset() const { return n_lines + n_batteries; }
  int power_offset() const { return n_lines + n_batteries + n_curtailable; }
};

// Static description of the controlled zone: node set, oriented lines, device
// locations, slack bus and the PTDF sensitivity matrix (rows follow `lines`,
// columns follow `nodes`).
//
// Sign conventions, fixed project-wide:
//   - injections are generation-positive: PTDF(l, n) is the MW carried by
//     line l per MW produced at node n and consumed at the slack bus;
//   - the slack bus is fixed for a whole run. If it is one of the zone nodes
//     its PTDF column is identically zero. It may also live outside the zone
//     when the PTDF matrix is supplied externally.
//
// A Zone is immutable after construction and safe to share across threads.
struct Zone {
  std::vector<std::string> nodes;
  std::vector<std::string> battery_nodes;
  std::vector<std::string> curtailable_nodes;
  std::vector<Line> lines;
  std::string slack_node;
  Eigen::MatrixXd ptdf;  // n_lines x n_nodes

  ZoneDims dims() const {
    return ZoneDims{static_cast<int>(lines.size()), static_cast<int>(battery_nodes.size()),
                    static_cast<int>(curtailable_nodes.size()), static_cast<int>(nodes.size())};
  }

  // Index of a node in `nodes`, -1 if unknown.
  int node_index(const std::string& id) const;
  // Index of a line by "from-to" name, -1 if unknown.
  int line_index(const std::string& name) const;

  std::vector<int> battery_indices() const;      // into `nodes`
  std::vector<int> curtailable_indices() const;  // into `nodes`
};

// DC power-flow PTDF computation: build the nodal susceptance matrix from the
// line reactances, ground the slack bus, and solve for the line flows caused
// by a 1 MW transfer from each node to the slack.
//
// Throws std::runtime_error on a disconnected network (naming the isolated
// component), on missing/non-positive reactances, on an unknown slack node,
// and on a singular reduced susceptance matrix.
Eigen::MatrixXd compute_ptdf(const std::vector<std::string>& nodes,
                             const std::vector<Line>& lines,
                             const std::string& slack_node);

// F = F0 + ptdf * delta_injection. Throws std::invalid_argument on dimension
// mismatch.
Eigen::VectorXd flow_update(const Eigen::VectorXd& f0, const Eigen::MatrixXd& ptdf,
                            const Eigen::VectorXd& delta_injection);

// Checks every Zone invariant and returns one human-readable violation per
// broken rule (empty means the zone is well formed).
std::vector<std::string> validate_zone(const Zone& zone);

}  // namespace gridmpc
