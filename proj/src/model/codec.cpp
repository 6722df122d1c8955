#include "ipal/codec.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ipal/error.hpp"
#include "ipal/validate.hpp"

namespace ipal {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array<std::string_view, 11> kMessageKeys = {
    "id",          "timestamp",    "protocol", "length",      "malicious",   "source",
    "destination", "message_type", "activity", "responds_to", "process_data"};

bool is_known_key(std::string_view k) {
  for (auto known : kMessageKeys)
    if (known == k) return true;
  return false;
}

std::string dump_string(const std::string& s) { return nlohmann::json(s).dump(); }

template <typename Json>
const Json& require(const Json& obj, std::string_view key) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ParseError(fmt::format("missing required key \"{}\"", key));
  return *it;
}

template <typename Json>
std::uint64_t get_uint(const Json& j, std::string_view key) {
  if (j.is_number_unsigned()) return j.template get<std::uint64_t>();
  if (j.is_number_integer()) {
    auto v = j.template get<std::int64_t>();
    if (v >= 0) return static_cast<std::uint64_t>(v);
  }
  throw ParseError(fmt::format("key \"{}\" must be a non-negative integer", key));
}

template <typename Json>
Timestamp get_time(const Json& j, std::string_view key) {
  if (!j.is_number()) throw ParseError(fmt::format("key \"{}\" must be a number", key));
  const double s = j.template get<double>();
  if (!std::isfinite(s)) throw ParseError(fmt::format("key \"{}\" is not finite", key));
  return timestamp_from_seconds(s);
}

template <typename Json>
std::string get_string(const Json& j, std::string_view key) {
  if (!j.is_string()) throw ParseError(fmt::format("key \"{}\" must be a string", key));
  return j.template get<std::string>();
}

template <typename Json>
ProcessData get_process_data(const Json& j, std::string_view key) {
  if (!j.is_object()) throw ParseError(fmt::format("key \"{}\" must be an object", key));
  ProcessData out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out.emplace(it.key(), value_from_json(nlohmann::json(it.value()), it.key()));
  return out;
}

std::string dump_process_data(const ProcessData& data) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : data) {
    if (!first) out += ',';
    first = false;
    out += dump_string(k);
    out += ':';
    out += value_to_json(v).dump();
  }
  out += '}';
  return out;
}

std::string dump_label(Label l) { return label_to_json(l).dump(); }

template <typename Fn>
auto wrap_json_errors(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("malformed record: {}", e.what()));
  }
}

}  // namespace

nlohmann::json value_to_json(const Value& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

Value value_from_json(const nlohmann::json& j, std::string_view context) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer() && !j.is_number_unsigned()) return j.get<std::int64_t>();
  if (j.is_number_unsigned()) {
    auto u = j.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      throw ParseError(fmt::format("value of \"{}\" exceeds the 64-bit signed range", context));
    return static_cast<std::int64_t>(u);
  }
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw ParseError(fmt::format("value of \"{}\" must be a number, boolean or string", context));
}

nlohmann::json label_to_json(Label l) {
  switch (l) {
    case Label::benign: return false;
    case Label::malicious: return true;
    case Label::unlabeled: return nullptr;
  }
  return nullptr;
}

Label label_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Label::unlabeled;
  if (j.is_boolean()) return j.get<bool>() ? Label::malicious : Label::benign;
  throw ParseError("key \"malicious\" must be true, false or null");
}

std::string canonical_process_data(const ProcessData& data) { return dump_process_data(data); }

std::string serialize_message(const IpalMessage& m) {
  validate_message(m);
  std::string out;
  out.reserve(160 + 24 * m.process_data.size());
  out += "{\"id\":";
  out += std::to_string(m.id);
  out += ",\"timestamp\":";
  out += format_seconds(m.timestamp);
  out += ",\"protocol\":";
  out += dump_string(m.protocol);
  out += ",\"length\":";
  out += std::to_string(m.length);
  out += ",\"malicious\":";
  out += dump_label(m.malicious);
  out += ",\"source\":";
  out += dump_string(m.source);
  out += ",\"destination\":";
  out += dump_string(m.destination);
  out += ",\"message_type\":";
  if (const auto* i = std::get_if<std::int64_t>(&m.type))
    out += std::to_string(*i);
  else
    out += dump_string(std::get<std::string>(m.type));
  out += ",\"activity\":\"";
  out += to_string(m.activity);
  out += "\",\"responds_to\":[";
  for (std::size_t i = 0; i < m.responds_to.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(m.responds_to[i]);
  }
  out += "],\"process_data\":";
  out += dump_process_data(m.process_data);
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) {
    out += ',';
    out += dump_string(it.key());
    out += ':';
    out += it.value().dump();
  }
  out += '}';
  return out;
}

IpalMessage parse_message(std::string_view line) {
  return wrap_json_errors([&] {
    const auto j = ojson::parse(line);
    if (!j.is_object()) throw ParseError("record is not an object");

    IpalMessage m;
    m.id = get_uint(require(j, "id"), "id");
    m.timestamp = get_time(require(j, "timestamp"), "timestamp");
    m.protocol = get_string(require(j, "protocol"), "protocol");
    m.length = get_uint(require(j, "length"), "length");
    m.malicious = label_from_json(nlohmann::json(require(j, "malicious")));
    m.source = get_string(require(j, "source"), "source");
    m.destination = get_string(require(j, "destination"), "destination");

    const auto& type = require(j, "message_type");
    if (type.is_number_integer())
      m.type = type.get<std::int64_t>();
    else if (type.is_string())
      m.type = type.get<std::string>();
    else
      throw ParseError("key \"message_type\" must be an integer or string");

    const auto activity = get_string(require(j, "activity"), "activity");
    auto act = parse_activity(activity);
    if (!act) throw ParseError(fmt::format("invalid activity \"{}\"", activity));
    m.activity = *act;

    const auto& rt = require(j, "responds_to");
    if (!rt.is_array()) throw ParseError("key \"responds_to\" must be an array");
    for (const auto& r : rt) m.responds_to.push_back(get_uint(r, "responds_to"));

    m.process_data = get_process_data(require(j, "process_data"), "process_data");

    for (auto it = j.begin(); it != j.end(); ++it)
      if (!is_known_key(it.key())) m.extra[it.key()] = it.value();

    validate_message(m);
    return m;
  });
}

std::string serialize_state(const StateMessage& s) {
  std::string out = "{\"timestamp\":";
  out += format_seconds(s.timestamp);
  out += ",\"malicious\":";
  out += dump_label(s.malicious);
  out += ",\"state\":";
  out += dump_process_data(s.state);
  out += '}';
  return out;
}

StateMessage parse_state(std::string_view line) {
  return wrap_json_errors([&] {
    const auto j = ojson::parse(line);
    if (!j.is_object()) throw ParseError("record is not an object");
    StateMessage s;
    s.timestamp = get_time(require(j, "timestamp"), "timestamp");
    auto mal = j.find("malicious");
    s.malicious = mal == j.end() ? Label::unlabeled : label_from_json(nlohmann::json(*mal));
    s.state = get_process_data(require(j, "state"), "state");
    return s;
  });
}

std::string serialize_alert(const AlertEvent& a) {
  nlohmann::ordered_json j;
  j["detector"] = a.detector;
  j["kind"] = a.kind == AlertEvent::Kind::point ? "point" : "interval";
  j["message_ids"] = a.message_ids;
  std::string out = j.dump();
  out.pop_back();
  out += ",\"start\":" + format_seconds(a.start);
  out += ",\"end\":" + format_seconds(a.end);
  out += ",\"score\":" + nlohmann::json(a.score).dump();
  out += ",\"violation_class\":";
  out += a.violation_class ? dump_string(*a.violation_class) : std::string("null");
  out += '}';
  return out;
}

AlertEvent parse_alert(std::string_view line) {
  return wrap_json_errors([&] {
    const auto j = ojson::parse(line);
    if (!j.is_object()) throw ParseError("record is not an object");
    AlertEvent a;
    a.detector = get_string(require(j, "detector"), "detector");
    const auto kind = get_string(require(j, "kind"), "kind");
    if (kind == "point")
      a.kind = AlertEvent::Kind::point;
    else if (kind == "interval")
      a.kind = AlertEvent::Kind::interval;
    else
      throw ParseError(fmt::format("invalid alert kind \"{}\"", kind));
    for (const auto& id : require(j, "message_ids")) a.message_ids.push_back(get_uint(id, "message_ids"));
    a.start = get_time(require(j, "start"), "start");
    a.end = get_time(require(j, "end"), "end");
    const auto& score = require(j, "score");
    a.score = score.is_number() ? score.get<double>() : std::numeric_limits<double>::quiet_NaN();
    auto vc = j.find("violation_class");
    if (vc != j.end() && vc->is_string()) a.violation_class = vc->get<std::string>();
    if (a.kind == AlertEvent::Kind::point && a.message_ids.empty())
      throw ValidationError("point alert ids", "point alert without message ids");
    if (a.start > a.end) throw ValidationError("interval order", "alert start after end");
    return a;
  });
}

}  // namespace ipal
