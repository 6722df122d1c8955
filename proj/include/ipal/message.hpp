#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace ipal {

/// All times are carried at microsecond resolution so that the text format
/// round-trips exactly.
using Duration = std::chrono::microseconds;
using Timestamp = std::chrono::sys_time<Duration>;

double to_seconds(Timestamp t);
double to_seconds(Duration d);
Timestamp timestamp_from_seconds(double seconds);
Duration duration_from_seconds(double seconds);

/// Fixed six-decimal rendering, e.g. "1600000000.250000".
std::string format_seconds(Timestamp t);

enum class Label { benign, malicious, unlabeled };

/// The abstract role of a message. The set is closed.
enum class Activity { request, response, command, command_response };

std::string_view to_string(Activity a);
std::optional<Activity> parse_activity(std::string_view s);

/// Answers are the two activities that reply to something.
constexpr bool is_answer(Activity a) {
  return a == Activity::response || a == Activity::command_response;
}

using Value = std::variant<bool, std::int64_t, double, std::string>;
using ProcessData = std::map<std::string, Value, std::less<>>;
using MessageType = std::variant<std::int64_t, std::string>;

std::string to_string(const MessageType& t);
std::string to_string(const Value& v);

/// Numeric view of a value; booleans map to 0/1, strings have none.
std::optional<double> as_number(const Value& v);

struct IpalMessage {
  std::uint64_t id = 0;
  Timestamp timestamp{};
  std::string protocol;
  std::uint64_t length = 0;
  Label malicious = Label::unlabeled;
  std::string source;
  std::string destination;
  MessageType type = std::int64_t{0};
  Activity activity = Activity::request;
  std::vector<std::uint64_t> responds_to;
  ProcessData process_data;
  /// Keys this version does not know, kept verbatim and re-emitted in order.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const IpalMessage&) const = default;
};

struct StateMessage {
  Timestamp timestamp{};
  ProcessData state;
  Label malicious = Label::unlabeled;

  bool operator==(const StateMessage&) const = default;
};

struct AlertEvent {
  enum class Kind { point, interval };

  std::string detector;
  Kind kind = Kind::point;
  std::vector<std::uint64_t> message_ids;
  Timestamp start{};
  Timestamp end{};
  double score = 0.0;
  std::optional<std::string> violation_class;

  bool operator==(const AlertEvent&) const = default;
};

}  // namespace ipal
