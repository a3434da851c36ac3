#pragma once

#include <nlohmann/json_fwd.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "gridmpc/simulator.hpp"

namespace gridmpc {

// Parse or semantic failure in a scenario file. The message carries the JSON
// path of the offending field.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& message) : std::runtime_error(message) {}
};

struct ParsedScenario {
  Scenario scenario;
  std::vector<std::string> warnings;
};

// Strict parser: unknown keys are rejected, every reference must resolve.
// Throws ScenarioError. When the network block carries both reactances and an
// explicit ptdf table, the supplied table wins and a warning is emitted.
ParsedScenario parse_scenario(const nlohmann::json& j);
ParsedScenario parse_scenario_text(const std::string& text);
ParsedScenario load_scenario(const std::string& path);

// Inverse of the parser; parse(serialize(s)) reproduces s exactly.
nlohmann::json serialize_scenario(const Scenario& scenario);

// Network-only entry point for PTDF utilities: reads the network block and
// ignores the rest of the document. Throws ScenarioError.
Zone parse_network(const nlohmann::json& j, const std::string& slack_override = "",
                   std::vector<std::string>* warnings = nullptr);

}  // namespace gridmpc
