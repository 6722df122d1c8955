#include "ipal/scenario.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "ipal/error.hpp"
#include "ipal/io.hpp"

namespace ipal {

ScenarioFile ScenarioFile::from_json(const nlohmann::json& j) {
  ScenarioFile f;
  try {
    const auto& list = j.is_array() ? j : j.at("scenarios");
    for (const auto& e : list) {
      Scenario s;
      s.name = e.value("name", fmt::format("scenario-{}", f.scenarios.size()));
      s.start = timestamp_from_seconds(e.at("start").get<double>());
      s.end = timestamp_from_seconds(e.at("end").get<double>());
      f.scenarios.push_back(std::move(s));
    }
    if (j.is_object() && j.contains("gaps"))
      for (const auto& g : j.at("gaps")) f.gaps.push_back(timestamp_from_seconds(g.get<double>()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("bad scenario file: {}", e.what()));
  }
  normalize_scenarios(f.scenarios);
  std::sort(f.gaps.begin(), f.gaps.end());
  return f;
}

ScenarioFile ScenarioFile::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

nlohmann::ordered_json ScenarioFile::to_json() const {
  nlohmann::ordered_json j;
  j["scenarios"] = nlohmann::ordered_json::array();
  for (const auto& s : scenarios) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["start"] = to_seconds(s.start);
    e["end"] = to_seconds(s.end);
    j["scenarios"].push_back(std::move(e));
  }
  j["gaps"] = nlohmann::ordered_json::array();
  for (auto g : gaps) j["gaps"].push_back(to_seconds(g));
  return j;
}

void ScenarioFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << to_json().dump(2) << '\n';
}

void normalize_scenarios(std::vector<Scenario>& scenarios) {
  std::sort(scenarios.begin(), scenarios.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (scenarios[i].start > scenarios[i].end)
      throw ValidationError("interval order", fmt::format("scenario \"{}\" ends before it starts", scenarios[i].name));
    if (i > 0 && scenarios[i].start <= scenarios[i - 1].end)
      throw ValidationError("non-overlapping scenarios", fmt::format("scenarios \"{}\" and \"{}\" overlap",
                                                                     scenarios[i - 1].name, scenarios[i].name));
  }
}

Label label_for(std::span<const Scenario> sorted_scenarios, Timestamp t) {
  auto it = std::upper_bound(sorted_scenarios.begin(), sorted_scenarios.end(), t,
                             [](Timestamp v, const Scenario& s) { return v < s.start; });
  if (it == sorted_scenarios.begin()) return Label::benign;
  return std::prev(it)->contains(t) ? Label::malicious : Label::benign;
}

}  // namespace ipal
