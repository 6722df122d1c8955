#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipal/message.hpp"

namespace ipal::modbus {

enum class Table { coil, discrete_input, input_register, holding_register };

enum class Decode { unsigned_int, signed_int, float32, boolean };

/// Order of the two registers of a 32-bit value. `big` = high word first.
enum class WordOrder { big, little };

std::string_view to_string(Table t);
std::string_view to_string(Decode d);

/// Declarative value-interpretation rule. `server` filters on the server-side
/// endpoint "ip:port:unit"; each component may be omitted from the right or be
/// "*". An empty filter matches every server.
struct InterpretationRule {
  std::string server;
  Table table = Table::holding_register;
  std::uint16_t address = 0;  // zero-based protocol address
  int combine = 1;            // registers per value, 1 or 2
  Decode decode = Decode::unsigned_int;
  WordOrder word_order = WordOrder::big;
  std::string name;

  bool matches_server(std::string_view endpoint) const;
  /// Number of filter components that are not wildcards.
  int specificity() const;
};

/// Holding register 0 is "reg40001", input register 0 "ireg30001", coil 0
/// "coil00001", discrete input 0 "di10001".
std::string default_variable_name(Table table, std::uint32_t address);

class RuleSet {
 public:
  RuleSet() = default;
  explicit RuleSet(std::vector<InterpretationRule> rules);

  static RuleSet from_json(const nlohmann::json& j);
  static RuleSet load(const std::filesystem::path& path);
  /// Same shape from_json accepts: {"rules":[...]}.
  nlohmann::ordered_json to_json() const;

  const std::vector<InterpretationRule>& rules() const { return rules_; }

  /// Decodes `registers` read from (or written to) `table` starting at
  /// `start`, writing named values into `out`.
  void interpret_registers(std::string_view server, Table table, std::uint16_t start,
                           std::span<const std::uint16_t> registers, ProcessData& out) const;

  void interpret_bits(std::string_view server, Table table, std::uint16_t start, const std::vector<bool>& bits,
                      ProcessData& out) const;

 private:
  const InterpretationRule* find(std::string_view server, Table table, std::uint32_t address) const;

  std::vector<InterpretationRule> rules_;
};

}  // namespace ipal::modbus
