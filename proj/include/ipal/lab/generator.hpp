#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipal/message.hpp"
#include "ipal/modbus/rules.hpp"

namespace ipal::lab {

enum class ValueProcess { constant, sine, random_walk };
enum class VariableType { real, integer, boolean };

struct VariableSpec {
  std::string name;
  VariableType type = VariableType::real;
  ValueProcess process = ValueProcess::constant;
  double value = 0.0;      // constant level, sine offset, walk start
  double amplitude = 1.0;  // sine
  double period = 10.0;    // sine period in seconds
  double step = 0.1;       // walk step stddev
  int decimals = 3;        // rounding applied to real values
};

struct PolledMessage {
  int function_code = 3;
  std::uint16_t address = 0;  // first register/coil
  std::vector<VariableSpec> variables;
};

struct ConnectionSpec {
  std::string client = "10.0.0.10";
  std::string server = "10.0.0.1";
  std::uint16_t client_port = 0;  // 0: 49152 + connection index
  std::uint16_t server_port = 502;
  std::uint8_t unit = 1;
  double period = 1.0;    // polling period (s)
  double jitter = 0.0;    // stddev of the per-cycle timing noise (s)
  double latency = 0.005; // request-to-answer delay (s)
  double offset = 0.0;    // first cycle start relative to the scenario start
  double spacing = 0.02;  // gap between the polls of one cycle (s)
  std::vector<PolledMessage> messages;

  std::string client_endpoint(std::size_t index) const;
  std::string server_endpoint() const;
};

struct ScenarioSpec {
  double start = 0.0;  // absolute start time (s since epoch)
  double duration = 60.0;
  std::uint64_t seed = 1;
  std::vector<ConnectionSpec> connections;

  static ScenarioSpec from_json(const nlohmann::json& j);
  static ScenarioSpec load(const std::filesystem::path& path);
  void validate() const;
};

/// Benign, correlated request/answer traffic. Deterministic in the spec.
/// Real values are rounded to `decimals` and then to float32 precision so
/// that they survive a trip through Modbus registers unchanged.
std::vector<IpalMessage> generate(const ScenarioSpec& spec);

/// Register layout the generator uses for each variable, as interpretation
/// rules for the transcriber.
modbus::RuleSet rules_for(const ScenarioSpec& spec);

/// Writes the stream as a Modbus/TCP capture (Ethernet/IPv4/TCP, one segment
/// per message, handshakes included). `spec` supplies the register layout.
/// Returns the number of frames written.
std::size_t export_pcap(const ScenarioSpec& spec, const std::vector<IpalMessage>& msgs,
                        const std::filesystem::path& path);

/// Modbus PDU (function code + data) that carries `m` under `spec`'s layout.
std::vector<std::uint8_t> encode_pdu(const ScenarioSpec& spec, const IpalMessage& m);

}  // namespace ipal::lab
