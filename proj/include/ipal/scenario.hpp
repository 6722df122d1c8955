#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipal/message.hpp"

namespace ipal {

/// A named attack interval [start, end], closed on both ends.
struct Scenario {
  std::string name;
  Timestamp start{};
  Timestamp end{};

  bool contains(Timestamp t) const { return start <= t && t <= end; }
  bool operator==(const Scenario&) const = default;
};

/// Ground-truth sidecar: attack intervals plus the timestamps of removed
/// packets (which leave no record behind to carry a label).
struct ScenarioFile {
  std::vector<Scenario> scenarios;
  std::vector<Timestamp> gaps;

  static ScenarioFile load(const std::filesystem::path& path);
  static ScenarioFile from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  void save(const std::filesystem::path& path) const;
};

/// Sorts by start and rejects overlapping or inverted intervals.
void normalize_scenarios(std::vector<Scenario>& scenarios);

/// Malicious if `t` lies in any scenario, benign otherwise.
Label label_for(std::span<const Scenario> sorted_scenarios, Timestamp t);

}  // namespace ipal
