#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipal/capture/packet.hpp"
#include "ipal/message.hpp"
#include "ipal/modbus/rules.hpp"

namespace ipal::modbus {

inline constexpr std::uint16_t kDefaultPort = 502;
inline constexpr std::size_t kMbapHeaderSize = 7;

/// How a function code maps onto the abstract activities. Reads become
/// request/response, writes command/command_response; skipped codes
/// (diagnostics and the like) produce no message.
enum class FunctionClass { read, write, skip };

class ActivityMap {
 public:
  /// Reads 1-4 and 23 (read/write multiple is treated as a read), writes
  /// 5, 6, 15, 16, 22; diagnostics 7, 8, 11, 12, 17, 43 are skipped.
  /// Anything else defaults to read.
  static ActivityMap defaults();
  /// Overrides on top of the defaults: {"read":[...], "write":[...], "skip":[...]}.
  static ActivityMap from_json(const nlohmann::json& j);

  FunctionClass classify(std::uint8_t function_code) const;
  void set(std::uint8_t function_code, FunctionClass c) { classes_[function_code & 0x7f] = c; }

 private:
  std::map<std::uint8_t, FunctionClass> classes_;
};

struct MbapFrame {
  std::uint16_t transaction = 0;
  std::uint16_t protocol = 0;
  std::uint16_t length = 0;  // bytes following the length field
  std::uint8_t unit = 0;
  std::span<const std::uint8_t> pdu;

  std::size_t wire_size() const { return 6u + length; }
};

/// Parses one MBAP frame from the front of `bytes`. nullopt if `bytes` is too
/// short for a complete frame. Throws ParseError for an impossible header.
std::optional<MbapFrame> parse_mbap(std::span<const std::uint8_t> bytes);

/// What a request told us, kept so its response can be interpreted.
struct RequestContext {
  std::uint64_t request_id = 0;
  Timestamp timestamp{};
  std::uint8_t function_code = 0;
  Table table = Table::holding_register;
  std::uint16_t start = 0;
  std::uint16_t quantity = 0;
};

/// Outstanding requests per connection, keyed by (transaction id, unit).
/// Entries older than the window are evicted; a newer request with the same
/// key replaces the old one.
class CorrelationTable {
 public:
  using Connection = std::string;
  using Key = std::pair<std::uint16_t, std::uint8_t>;

  explicit CorrelationTable(Duration window = std::chrono::seconds(5)) : window_(window) {}

  void add_request(const Connection& conn, Key key, const RequestContext& ctx);
  /// Removes and returns the matching outstanding request, if it is still
  /// within the window at time `now`.
  std::optional<RequestContext> take(const Connection& conn, Key key, Timestamp now);

  std::size_t outstanding() const;
  Duration window() const { return window_; }

 private:
  void evict(Timestamp now);

  Duration window_;
  std::map<Connection, std::map<Key, RequestContext>> pending_;
  std::deque<std::tuple<Timestamp, Connection, Key>> order_;
};

/// For answers: takes the matching outstanding request out of `table`, sets
/// responds_to to its id (empty when nothing matches) and returns it. Other
/// activities pass through untouched.
std::optional<RequestContext> correlate(IpalMessage& msg, const CorrelationTable::Connection& conn,
                                        CorrelationTable::Key key, CorrelationTable& table);

struct DissectorConfig {
  std::uint16_t port = kDefaultPort;
  ActivityMap activities = ActivityMap::defaults();
  RuleSet rules;
  Duration correlation_window = std::chrono::seconds(5);
};

struct Endpoints {
  std::string client;  // "ip:port"
  std::string server;  // "ip:port"
};

/// Stateless decoding of one MBAP frame. `to_server` is the traffic
/// direction. Answers come back without process data; see
/// fill_response_data. Returns nullopt for skipped function codes and
/// malformed PDUs (with the reason in `diagnostic`).
struct PduDecode {
  IpalMessage message;  // id and responds_to left for the caller
  std::optional<RequestContext> request_info;
};
std::optional<PduDecode> dissect_frame(const MbapFrame& frame, bool to_server, const Endpoints& ends,
                                       const DissectorConfig& cfg, std::string* diagnostic = nullptr);

/// Interprets the data of a read response given the request it answers.
/// Returns false if the PDU does not fit the request.
bool fill_response_data(const MbapFrame& frame, const RequestContext& request, const Endpoints& ends,
                        const DissectorConfig& cfg, ProcessData& out);

struct DissectorStats {
  std::size_t frames_seen = 0;
  std::size_t pdus = 0;
  std::size_t malformed = 0;
  std::size_t skipped_functions = 0;
};

/// Reassembles TCP streams on the Modbus port, dissects complete MBAP frames
/// and correlates responses with their requests.
class ModbusDissector {
 public:
  explicit ModbusDissector(DissectorConfig cfg);

  /// Feeds one TCP segment; appends completed messages to `out` with ids
  /// drawn from `next_id`.
  void feed(Timestamp t, const capture::TcpSegment& seg, std::uint64_t& next_id, std::vector<IpalMessage>& out);

  const DissectorStats& stats() const { return stats_; }
  const DissectorConfig& config() const { return cfg_; }

 private:
  struct Flow {
    std::vector<std::uint8_t> buffer;
    std::uint32_t next_seq = 0;
    bool synced = false;
  };

  DissectorConfig cfg_;
  CorrelationTable table_;
  std::map<std::string, Flow> flows_;
  DissectorStats stats_;
};

}  // namespace ipal::modbus
