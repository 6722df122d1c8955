#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ipal/message.hpp"

namespace ipal {

// Line-record codecs. Every record is one JSON object on one line; keys are
// emitted in a fixed order so identical records serialize to identical bytes.

std::string serialize_message(const IpalMessage& m);
IpalMessage parse_message(std::string_view line);

std::string serialize_state(const StateMessage& s);
StateMessage parse_state(std::string_view line);

std::string serialize_alert(const AlertEvent& a);
AlertEvent parse_alert(std::string_view line);

nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j, std::string_view context);

nlohmann::json label_to_json(Label l);
Label label_from_json(const nlohmann::json& j);

/// Canonical text of a process-data map (sorted keys, compact JSON).
std::string canonical_process_data(const ProcessData& data);

}  // namespace ipal
