#include "ipal/message.hpp"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "ipal/error.hpp"

namespace ipal {

double to_seconds(Timestamp t) { return to_seconds(t.time_since_epoch()); }

double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1e6; }

Duration duration_from_seconds(double seconds) {
  if (!std::isfinite(seconds)) throw DataError("non-finite time value");
  return Duration{std::llround(seconds * 1e6)};
}

Timestamp timestamp_from_seconds(double seconds) {
  return Timestamp{duration_from_seconds(seconds)};
}

std::string format_seconds(Timestamp t) {
  const auto us = t.time_since_epoch().count();
  const auto mag = static_cast<std::uint64_t>(us < 0 ? -(us + 1) + 1 : us);
  return fmt::format("{}{}.{:06}", us < 0 ? "-" : "", mag / 1000000, mag % 1000000);
}

std::string_view to_string(Activity a) {
  switch (a) {
    case Activity::request: return "request";
    case Activity::response: return "response";
    case Activity::command: return "command";
    case Activity::command_response: return "command_response";
  }
  return "request";
}

std::optional<Activity> parse_activity(std::string_view s) {
  if (s == "request") return Activity::request;
  if (s == "response") return Activity::response;
  if (s == "command") return Activity::command;
  if (s == "command_response") return Activity::command_response;
  return std::nullopt;
}

std::string to_string(const MessageType& t) {
  if (const auto* i = std::get_if<std::int64_t>(&t)) return std::to_string(*i);
  return std::get<std::string>(t);
}

std::string to_string(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else return fmt::format("{}", x);
      },
      v);
}

std::optional<double> as_number(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

}  // namespace ipal
