#include "ipal/modbus/rules.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <fmt/format.h>

#include "ipal/error.hpp"
#include "ipal/io.hpp"

namespace ipal::modbus {

namespace {

std::vector<std::string_view> split_endpoint(std::string_view s) {
  std::vector<std::string_view> parts;
  while (true) {
    auto pos = s.find(':');
    parts.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return parts;
}

Table parse_table(const std::string& s) {
  if (s == "holding" || s == "holding_register") return Table::holding_register;
  if (s == "input" || s == "input_register") return Table::input_register;
  if (s == "coil") return Table::coil;
  if (s == "discrete" || s == "discrete_input") return Table::discrete_input;
  throw ParseError(fmt::format("unknown register table \"{}\"", s));
}

Decode parse_decode(const std::string& s) {
  if (s == "unsigned") return Decode::unsigned_int;
  if (s == "signed") return Decode::signed_int;
  if (s == "float32") return Decode::float32;
  if (s == "boolean") return Decode::boolean;
  throw ParseError(fmt::format("unknown decode \"{}\"", s));
}

bool is_bit_table(Table t) { return t == Table::coil || t == Table::discrete_input; }

Value decode_value(const InterpretationRule& r, std::span<const std::uint16_t> regs) {
  std::uint32_t raw = regs[0];
  if (r.combine == 2) {
    const std::uint32_t hi = r.word_order == WordOrder::big ? regs[0] : regs[1];
    const std::uint32_t lo = r.word_order == WordOrder::big ? regs[1] : regs[0];
    raw = (hi << 16) | lo;
  }
  switch (r.decode) {
    case Decode::unsigned_int:
      return static_cast<std::int64_t>(raw);
    case Decode::signed_int:
      if (r.combine == 2) return static_cast<std::int64_t>(static_cast<std::int32_t>(raw));
      return static_cast<std::int64_t>(static_cast<std::int16_t>(raw));
    case Decode::float32:
      return static_cast<double>(std::bit_cast<float>(raw));
    case Decode::boolean:
      return raw != 0;
  }
  return static_cast<std::int64_t>(raw);
}

}  // namespace

std::string_view to_string(Table t) {
  switch (t) {
    case Table::coil: return "coil";
    case Table::discrete_input: return "discrete";
    case Table::input_register: return "input";
    case Table::holding_register: return "holding";
  }
  return "holding";
}

std::string_view to_string(Decode d) {
  switch (d) {
    case Decode::unsigned_int: return "unsigned";
    case Decode::signed_int: return "signed";
    case Decode::float32: return "float32";
    case Decode::boolean: return "boolean";
  }
  return "unsigned";
}

bool InterpretationRule::matches_server(std::string_view endpoint) const {
  if (server.empty()) return true;
  const auto want = split_endpoint(server);
  const auto have = split_endpoint(endpoint);
  if (want.size() > have.size()) return false;
  for (std::size_t i = 0; i < want.size(); ++i)
    if (want[i] != "*" && want[i] != have[i]) return false;
  return true;
}

int InterpretationRule::specificity() const {
  if (server.empty()) return 0;
  int n = 0;
  for (auto part : split_endpoint(server))
    if (part != "*") ++n;
  return n;
}

std::string default_variable_name(Table table, std::uint32_t address) {
  switch (table) {
    case Table::holding_register: return fmt::format("reg{}", 40001 + address);
    case Table::input_register: return fmt::format("ireg{}", 30001 + address);
    case Table::coil: return fmt::format("coil{:05}", 1 + address);
    case Table::discrete_input: return fmt::format("di{}", 10001 + address);
  }
  return fmt::format("reg{}", 40001 + address);
}

RuleSet::RuleSet(std::vector<InterpretationRule> rules) : rules_(std::move(rules)) {
  for (const auto& r : rules_) {
    if (r.combine != 1 && r.combine != 2)
      throw ValidationError("combine", fmt::format("rule \"{}\": combine must be 1 or 2", r.name));
    if (r.decode == Decode::float32 && r.combine != 2)
      throw ValidationError("combine", fmt::format("rule \"{}\": float32 needs two registers", r.name));
    if (is_bit_table(r.table) && r.combine != 1)
      throw ValidationError("combine", fmt::format("rule \"{}\": bit tables take single bits", r.name));
    if (r.name.empty()) throw ValidationError("name", "rule without a variable name");
    if (static_cast<std::uint32_t>(r.address) + r.combine > 65536)
      throw ValidationError("address", fmt::format("rule \"{}\" runs past address 65535", r.name));
  }
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    for (std::size_t j = i + 1; j < rules_.size(); ++j) {
      const auto& a = rules_[i];
      const auto& b = rules_[j];
      if (a.server != b.server || a.table != b.table) continue;
      const bool overlap = a.address < b.address + b.combine && b.address < a.address + a.combine;
      if (overlap)
        throw ValidationError("non-overlapping ranges",
                              fmt::format("rules \"{}\" and \"{}\" overlap on {}", a.name, b.name, to_string(a.table)));
    }
  }
}

RuleSet RuleSet::from_json(const nlohmann::json& j) {
  const auto& list = j.is_object() && j.contains("rules") ? j.at("rules") : j;
  if (!list.is_array()) throw ParseError("rules file must hold an array of rules");
  std::vector<InterpretationRule> rules;
  try {
    for (const auto& e : list) {
      InterpretationRule r;
      r.server = e.value("server", std::string{});
      r.table = parse_table(e.value("table", std::string{"holding"}));
      const auto addr = e.at("address").get<std::int64_t>();
      if (addr < 0 || addr > 65535) throw ParseError(fmt::format("address {} out of range", addr));
      r.address = static_cast<std::uint16_t>(addr);
      r.combine = e.value("combine", 1);
      r.decode = parse_decode(e.value("decode", std::string{is_bit_table(r.table) ? "boolean" : "unsigned"}));
      const auto order = e.value("word_order", std::string{"big"});
      if (order != "big" && order != "little") throw ParseError(fmt::format("unknown word_order \"{}\"", order));
      r.word_order = order == "big" ? WordOrder::big : WordOrder::little;
      r.name = e.at("name").get<std::string>();
      rules.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("bad rule: {}", e.what()));
  }
  return RuleSet(std::move(rules));
}

RuleSet RuleSet::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

nlohmann::ordered_json RuleSet::to_json() const {
  auto list = nlohmann::ordered_json::array();
  for (const auto& r : rules_)
    list.push_back({{"server", r.server},
                    {"table", to_string(r.table)},
                    {"address", r.address},
                    {"combine", r.combine},
                    {"decode", to_string(r.decode)},
                    {"word_order", r.word_order == WordOrder::big ? "big" : "little"},
                    {"name", r.name}});
  return {{"rules", std::move(list)}};
}

const InterpretationRule* RuleSet::find(std::string_view server, Table table, std::uint32_t address) const {
  const InterpretationRule* best = nullptr;
  for (const auto& r : rules_) {
    if (r.table != table || address < r.address || address >= static_cast<std::uint32_t>(r.address) + r.combine)
      continue;
    if (!r.matches_server(server)) continue;
    if (!best || r.specificity() > best->specificity()) best = &r;
  }
  return best;
}

void RuleSet::interpret_registers(std::string_view server, Table table, std::uint16_t start,
                                  std::span<const std::uint16_t> registers, ProcessData& out) const {
  std::size_t i = 0;
  while (i < registers.size()) {
    const std::uint32_t addr = start + static_cast<std::uint32_t>(i);
    const auto* rule = find(server, table, addr);
    if (rule && rule->address == addr && i + rule->combine <= registers.size()) {
      out.insert_or_assign(rule->name, decode_value(*rule, registers.subspan(i, rule->combine)));
      i += rule->combine;
      continue;
    }
    out.insert_or_assign(default_variable_name(table, addr), static_cast<std::int64_t>(registers[i]));
    ++i;
  }
}

void RuleSet::interpret_bits(std::string_view server, Table table, std::uint16_t start, const std::vector<bool>& bits,
                             ProcessData& out) const {
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const std::uint32_t addr = start + static_cast<std::uint32_t>(i);
    const auto* rule = find(server, table, addr);
    out.insert_or_assign(rule ? rule->name : default_variable_name(table, addr), bits[i]);
  }
}

}  // namespace ipal::modbus
