#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipal/kernels/confusion.hpp"
#include "ipal/message.hpp"
#include "ipal/scenario.hpp"

namespace ipal::eval {

/// Per-record ground truth plus the attack intervals.
struct GroundTruth {
  std::vector<std::uint64_t> ids;  // message ids; state streams use the record index
  std::vector<std::int64_t> times;  // microseconds since epoch, ascending
  std::vector<std::uint8_t> labels;  // 1 attack, 0 benign, 2 unlabeled
  std::vector<Scenario> scenarios;  // sorted, disjoint

  static GroundTruth from_messages(const std::vector<IpalMessage>& msgs, std::vector<Scenario> scenarios = {});
  static GroundTruth from_states(const std::vector<StateMessage>& states, std::vector<Scenario> scenarios = {});

  /// Median gap between consecutive records (zero for fewer than two).
  Duration median_gap() const;
  std::string digest() const;
  /// Warns about malicious records outside every scenario; returns their count.
  std::size_t check_labels_in_scenarios() const;
};

/// Undefined values (zero denominators) are empty.
struct PointMetrics {
  kernels::Confusion counts;
  std::optional<double> accuracy, precision, recall, f1, tpr, fpr;
};

struct ScenarioMetrics {
  std::size_t scenarios = 0;
  std::size_t detected_attacks = 0;
  std::size_t false_alarms = 0;
  double penalty_score = 0.0;  // seconds
  std::optional<double> odr;       // percent
  std::optional<double> coverage;  // percent (CP)
};

struct Interval {
  Timestamp start{};
  Timestamp end{};
  bool operator==(const Interval&) const = default;
};

PointMetrics metrics_from_counts(const kernels::Confusion& c);

PointMetrics point_metrics(const std::vector<AlertEvent>& alerts, const GroundTruth& truth, bool parallel = true);

/// Alerts as maximal closed alarm intervals; a point alert at t covers
/// [t, t + point_width]. Intervals that touch are merged.
std::vector<Interval> alarm_intervals(const std::vector<AlertEvent>& alerts, Duration point_width);

/// `alarms` must be sorted by start. A scenario counts as detected when an
/// alarm intersects [start, end + grace].
ScenarioMetrics scenario_metrics(const std::vector<Interval>& alarms, const std::vector<Scenario>& scenarios,
                                 Duration grace = Duration::zero());

enum class Mode { point, scenario, both };
std::optional<Mode> parse_mode(std::string_view s);

struct EvalOptions {
  Mode mode = Mode::both;
  std::optional<Duration> point_width;  // default: truth median gap
  Duration grace = Duration::zero();
  bool parallel = true;
};

struct EvalReport {
  std::string detector;
  Mode mode = Mode::both;
  std::size_t records = 0;
  std::string truth_digest;
  std::vector<Scenario> scenarios;
  std::optional<PointMetrics> point;
  std::optional<ScenarioMetrics> scenario;
  std::vector<Interval> alarms;
  Duration point_width{};
  Duration grace{};

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::ordered_json& j);
  std::string dump() const;
  void save(const std::filesystem::path& path) const;
  static EvalReport load(const std::filesystem::path& path);
};

EvalReport evaluate(std::string detector, const std::vector<AlertEvent>& alerts, const GroundTruth& truth,
                    const EvalOptions& opt = {});

/// Union of several detectors' alerts, ordered by start; the name joins
/// the inputs with '+'.
std::vector<AlertEvent> union_alerts(const std::vector<std::vector<AlertEvent>>& inputs);

/// Comparison rows: one per report. Undefined values print as "-".
std::string comparison_csv(const std::vector<EvalReport>& reports);
/// Alarm intervals per detector plus scenario bands, for external plotting.
nlohmann::ordered_json timeline(const std::vector<EvalReport>& reports);

}  // namespace ipal::eval
